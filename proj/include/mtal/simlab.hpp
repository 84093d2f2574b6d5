#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtal/budget.hpp"
#include "mtal/common.hpp"
#include "mtal/fusion.hpp"
#include "mtal/pareto.hpp"
#include "mtal/rng.hpp"
#include "mtal/scores.hpp"
#include "mtal/stats.hpp"
#include "mtal/strategies.hpp"

namespace mtal {

// ---------------------------------------------------------------------------
// Synthetic corpora
// ---------------------------------------------------------------------------

// Three ways two tasks can relate:
//   complementary - task B is an independently corrupted view of the same
//                   latent token class, so each task carries signal the other
//                   lacks;
//   hierarchical  - task B's non-null labels exist only on tokens task A
//                   annotated as non-null (B depends on A's output);
//   granularity   - task A labels tokens, task B labels the whole sentence.
enum class Scenario { complementary, hierarchical, granularity };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::complementary: return "complementary";
        case Scenario::hierarchical: return "hierarchical";
        default: return "granularity";
    }
}

inline std::optional<Scenario> parse_scenario(const std::string& name) {
    if (name == "complementary") return Scenario::complementary;
    if (name == "hierarchical") return Scenario::hierarchical;
    if (name == "granularity") return Scenario::granularity;
    return std::nullopt;
}

enum class TaskKind { token, sentence };

struct TaskSpec {
    TaskKind kind = TaskKind::token;
    int label_count = 2;
};

struct Sentence {
    std::vector<double> feats;  // m x d, row-major
    std::vector<int> labels_a;  // per token
    std::vector<int> labels_b;  // per token; empty in the granularity scenario
    int sentence_label = 0;     // granularity scenario only
    int m = 0;
    int nt = 0;                 // non-null task-A tokens
};

struct CorpusConfig {
    int train_size = 400;
    int dev_size = 16;
    int test_size = 100;
    int min_tokens = 4;
    int max_tokens = 10;
    int d = 8;
    int labels_a = 5;
    int labels_b = 5;
    double noise = 0.1;          // label corruption probability
    double feature_sigma = 0.5;  // within-class feature spread
    double p_null = 0.45;        // prior mass on the null token label

    void validate() const {
        require(train_size >= 1 && dev_size >= 1 && test_size >= 1, "CorpusConfig: each split needs at least one sentence");
        require(min_tokens >= 1 && max_tokens >= min_tokens, "CorpusConfig: bad token length range");
        require(d >= 1, "CorpusConfig: feature dimension must be >= 1");
        require(labels_a >= 2 && labels_b >= 2, "CorpusConfig: need at least two labels per task");
        require(labels_a <= d, "CorpusConfig: need d >= labels_a for class geometry");
        require(noise >= 0.0 && noise <= 1.0, "CorpusConfig: noise outside [0,1]");
        require(feature_sigma >= 0.0, "CorpusConfig: negative feature sigma");
        require(p_null >= 0.0 && p_null < 1.0, "CorpusConfig: p_null outside [0,1)");
    }
};

struct SyntheticCorpus {
    Scenario scenario = Scenario::complementary;
    int d = 0;
    std::vector<TaskSpec> tasks;  // always two
    std::vector<Sentence> sentences;
    std::vector<int> train_ids, dev_ids, test_ids;

    const double* token_features(int sid, int token) const {
        return sentences[sid].feats.data() + static_cast<std::size_t>(token) * d;
    }

    std::vector<ExampleSize> sizes() const {
        std::vector<ExampleSize> out;
        out.reserve(sentences.size());
        for (const auto& s : sentences) out.push_back({s.m, s.nt});
        return out;
    }
};

// Gold token labels for a token task.
inline const std::vector<int>& token_gold(const SyntheticCorpus& corpus, int sid, std::size_t task) {
    require(task < corpus.tasks.size(), "token_gold: task out of range");
    require(corpus.tasks[task].kind == TaskKind::token, "token_gold: not a token task");
    return task == 0 ? corpus.sentences[sid].labels_a : corpus.sentences[sid].labels_b;
}

inline int sentence_gold(const SyntheticCorpus& corpus, int sid) {
    require(corpus.tasks.size() == 2 && corpus.tasks[1].kind == TaskKind::sentence,
            "sentence_gold: corpus has no sentence task");
    return corpus.sentences[sid].sentence_label;
}

namespace detail {

// Uniform draw over the label space excluding `current`.
inline int flip_label(Rng& rng, int current, int space) {
    if (space < 2) return current;
    int v = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(space - 1)));
    if (v >= current) ++v;
    return v;
}

// Same, restricted to non-null labels {1, .., space-1}.
inline int flip_label_nonnull(Rng& rng, int current, int space) {
    if (space < 3) return current;
    int v = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(space - 2)));
    if (v >= current) ++v;
    return v;
}

} // namespace detail

// Token features are class-conditional Gaussians around per-label centers;
// observed labels are the latent class corrupted with probability `noise`.
// Task B is derived per scenario from the same latents, so the two tasks
// genuinely share structure. Deterministic for a given seed.
inline SyntheticCorpus generate_corpus(Scenario scenario, const CorpusConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (scenario == Scenario::complementary)
        require(cfg.labels_a == cfg.labels_b, "CorpusConfig: complementary scenario needs labels_b == labels_a");
    if (scenario == Scenario::hierarchical)
        require(cfg.labels_a + cfg.labels_b - 1 <= cfg.d,
                "CorpusConfig: hierarchical scenario needs labels_a + labels_b - 1 <= d");

    SyntheticCorpus corpus;
    corpus.scenario = scenario;
    corpus.d = cfg.d;
    switch (scenario) {
        case Scenario::complementary:
            corpus.tasks = {{TaskKind::token, cfg.labels_a}, {TaskKind::token, cfg.labels_b}};
            break;
        case Scenario::hierarchical:
            corpus.tasks = {{TaskKind::token, cfg.labels_a}, {TaskKind::token, cfg.labels_b}};
            break;
        case Scenario::granularity:
            corpus.tasks = {{TaskKind::token, cfg.labels_a}, {TaskKind::sentence, cfg.labels_a}};
            break;
    }

    Rng rng(seed);

    // Class centers sit on jittered orthogonal axes so every pair is equally
    // separated; random placement would make per-seed difficulty a lottery.
    // The axis offset keeps feature norms large enough for gradient descent
    // to leave its flat start well inside the early-stopping patience window.
    std::vector<double> centers(static_cast<std::size_t>(cfg.labels_a) * cfg.d, 0.0);
    for (int l = 0; l < cfg.labels_a; ++l) {
        double* c = centers.data() + static_cast<std::size_t>(l) * cfg.d;
        for (int j = 0; j < cfg.d; ++j) c[j] = 0.5 * rng.next_gaussian();
        c[l] += 4.0;
    }

    // The complementary map is a permutation of A's classes, so task B
    // retains full information about the latent class under its own names.
    std::vector<int> map_b(cfg.labels_a, 0);
    if (scenario == Scenario::complementary) {
        std::vector<int> perm(cfg.labels_a - 1);
        std::iota(perm.begin(), perm.end(), 1);
        rng.shuffle(perm);
        for (int l = 1; l < cfg.labels_a; ++l) map_b[l] = perm[l - 1];
    }

    // Hierarchical task B is a finer subtype layered under task A: every
    // token carries a latent subtype with its own (weaker) feature signal in
    // the coordinates above A's axes, but the subtype annotation is revealed
    // only where the A annotation is non-null. That makes B the dependent and
    // harder of the two tasks.
    std::vector<double> subcenters;
    if (scenario == Scenario::hierarchical) {
        subcenters.assign(static_cast<std::size_t>(cfg.labels_b) * cfg.d, 0.0);
        for (int l = 1; l < cfg.labels_b; ++l) {
            double* c = subcenters.data() + static_cast<std::size_t>(l) * cfg.d;
            for (int j = 0; j < cfg.d; ++j) c[j] = 0.25 * rng.next_gaussian();
            c[cfg.labels_a + l - 1] += 2.0;
        }
    }

    const int total = cfg.train_size + cfg.dev_size + cfg.test_size;
    corpus.sentences.reserve(total);
    for (int sid = 0; sid < total; ++sid) {
        Sentence sent;
        sent.m = cfg.min_tokens +
                 static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.max_tokens - cfg.min_tokens + 1)));
        sent.feats.resize(static_cast<std::size_t>(sent.m) * cfg.d);
        sent.labels_a.resize(sent.m);
        if (scenario != Scenario::granularity) sent.labels_b.resize(sent.m);

        for (int i = 0; i < sent.m; ++i) {
            int true_a = 0;
            if (rng.next_unit() >= cfg.p_null)
                true_a = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.labels_a - 1)));

            int subtype = 0;
            if (scenario == Scenario::hierarchical)
                subtype = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.labels_b - 1)));

            double* f = sent.feats.data() + static_cast<std::size_t>(i) * cfg.d;
            const double* c = centers.data() + static_cast<std::size_t>(true_a) * cfg.d;
            for (int j = 0; j < cfg.d; ++j) f[j] = c[j] + cfg.feature_sigma * rng.next_gaussian();
            if (scenario == Scenario::hierarchical) {
                const double* sc = subcenters.data() + static_cast<std::size_t>(subtype) * cfg.d;
                for (int j = 0; j < cfg.d; ++j) f[j] += sc[j];
            }

            int observed_a = true_a;
            if (rng.next_unit() < cfg.noise) observed_a = detail::flip_label(rng, true_a, cfg.labels_a);
            sent.labels_a[i] = observed_a;
            if (observed_a != 0) ++sent.nt;

            if (scenario == Scenario::complementary) {
                int b = map_b[true_a];
                if (rng.next_unit() < cfg.noise) b = detail::flip_label(rng, b, cfg.labels_b);
                sent.labels_b[i] = b;
            } else if (scenario == Scenario::hierarchical) {
                // The subtype is annotated only on top of a non-null A
                // annotation, so the containment invariant holds by
                // construction; null A tokens keep their subtype latent.
                int b = 0;
                if (observed_a != 0) {
                    b = subtype;
                    if (rng.next_unit() < cfg.noise) b = detail::flip_label_nonnull(rng, b, cfg.labels_b);
                }
                sent.labels_b[i] = b;
            }
        }

        if (scenario == Scenario::granularity) {
            // Majority non-null observed A label, ties to the smallest,
            // all-null sentences to 0, then the usual corruption.
            std::vector<int> counts(cfg.labels_a, 0);
            for (int l : sent.labels_a)
                if (l != 0) ++counts[l];
            int best = 0, best_count = 0;
            for (int l = 1; l < cfg.labels_a; ++l)
                if (counts[l] > best_count) {
                    best = l;
                    best_count = counts[l];
                }
            if (rng.next_unit() < cfg.noise) best = detail::flip_label(rng, best, cfg.labels_a);
            sent.sentence_label = best;
        }

        corpus.sentences.push_back(std::move(sent));
    }

    corpus.train_ids.resize(cfg.train_size);
    std::iota(corpus.train_ids.begin(), corpus.train_ids.end(), 0);
    corpus.dev_ids.resize(cfg.dev_size);
    std::iota(corpus.dev_ids.begin(), corpus.dev_ids.end(), cfg.train_size);
    corpus.test_ids.resize(cfg.test_size);
    std::iota(corpus.test_ids.begin(), corpus.test_ids.end(), cfg.train_size + cfg.dev_size);
    return corpus;
}

// ---------------------------------------------------------------------------
// Toy gated multi-task learner
// ---------------------------------------------------------------------------

enum class LossMode { cross_entropy, label_smoothing };

inline const char* to_string(LossMode m) {
    return m == LossMode::cross_entropy ? "ce" : "ls";
}

struct TrainParams {
    int hidden = 16;
    int epochs = 200;
    double lr = 0.1;
    int patience = 20;
    LossMode loss = LossMode::cross_entropy;
    double ls_alpha = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        require(hidden >= 1, "TrainParams: hidden must be >= 1");
        require(epochs >= 0, "TrainParams: negative epoch count");
        require(lr > 0.0, "TrainParams: learning rate must be positive");
        require(patience >= 1, "TrainParams: patience must be >= 1");
        require(ls_alpha >= 0.0 && ls_alpha < 1.0, "TrainParams: ls_alpha outside [0,1)");
    }
};

// Linear shared and private encoders feeding a sigmoid gate:
//   g = a (.) e_s + (1-a) (.) e_u,  a = sigmoid(W_g [e_s; e_u] + b_g),
// then a per-task softmax decoder. Single-task mode drops sharing: g = e_u.
struct ToyLearner {
    int d = 0;
    int h = 0;
    bool multi_task = true;
    std::vector<TaskSpec> tasks;

    std::vector<double> W_s, b_s;  // h x d, h
    struct Head {
        std::vector<double> W_u, b_u;  // h x d, h
        std::vector<double> W_g, b_g;  // h x 2h, h
        std::vector<double> W_d, b_d;  // s x h, s
    };
    std::vector<Head> heads;

    static ToyLearner init(int d, int h, std::vector<TaskSpec> tasks, bool multi_task, std::uint64_t seed) {
        require(d >= 1 && h >= 1, "ToyLearner: bad dimensions");
        require(!tasks.empty(), "ToyLearner: no tasks");
        ToyLearner L;
        L.d = d;
        L.h = h;
        L.multi_task = multi_task;
        L.tasks = std::move(tasks);
        Rng rng(seed);
        auto draw = [&](std::size_t count) {
            std::vector<double> v(count);
            // Scale keeps initial logits small but not so small that the
            // first argmax flips land outside the early-stopping window.
            for (auto& x : v) x = 0.1 * rng.next_gaussian();
            return v;
        };
        const auto hd = static_cast<std::size_t>(h) * d;
        L.W_s = draw(hd);
        L.b_s.assign(h, 0.0);
        for (const auto& spec : L.tasks) {
            require(spec.label_count >= 2, "ToyLearner: task needs at least two labels");
            Head head;
            head.W_u = draw(hd);
            head.b_u.assign(h, 0.0);
            head.W_g = draw(static_cast<std::size_t>(h) * 2 * h);
            head.b_g.assign(h, 0.0);
            head.W_d = draw(static_cast<std::size_t>(spec.label_count) * h);
            head.b_d.assign(spec.label_count, 0.0);
            L.heads.push_back(std::move(head));
        }
        return L;
    }

    struct Trace {
        std::vector<double> e_s, e_u, a, g, p;
    };

    Trace forward(std::size_t task, const double* x) const {
        require(task < tasks.size(), "ToyLearner: task out of range");
        const auto& head = heads[task];
        const int s = tasks[task].label_count;
        Trace t;
        t.e_u.resize(h);
        for (int i = 0; i < h; ++i) {
            double acc = head.b_u[i];
            const double* row = head.W_u.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) acc += row[j] * x[j];
            t.e_u[i] = acc;
        }
        if (multi_task) {
            t.e_s.resize(h);
            for (int i = 0; i < h; ++i) {
                double acc = b_s[i];
                const double* row = W_s.data() + static_cast<std::size_t>(i) * d;
                for (int j = 0; j < d; ++j) acc += row[j] * x[j];
                t.e_s[i] = acc;
            }
            t.a.resize(h);
            t.g.resize(h);
            for (int i = 0; i < h; ++i) {
                double acc = head.b_g[i];
                const double* row = head.W_g.data() + static_cast<std::size_t>(i) * 2 * h;
                for (int j = 0; j < h; ++j) acc += row[j] * t.e_s[j];
                for (int j = 0; j < h; ++j) acc += row[h + j] * t.e_u[j];
                const double a = 1.0 / (1.0 + std::exp(-acc));
                t.a[i] = a;
                t.g[i] = a * t.e_s[i] + (1.0 - a) * t.e_u[i];
            }
        } else {
            t.g = t.e_u;
        }
        std::vector<double> z(s);
        for (int i = 0; i < s; ++i) {
            double acc = head.b_d[i];
            const double* row = head.W_d.data() + static_cast<std::size_t>(i) * h;
            for (int j = 0; j < h; ++j) acc += row[j] * t.g[j];
            z[i] = acc;
        }
        t.p = softmax(z);
        return t;
    }
};

// Mean-pooled token features; the sentence task consumes these.
inline std::vector<double> pooled_features(const SyntheticCorpus& corpus, int sid) {
    const auto& sent = corpus.sentences[sid];
    std::vector<double> x(corpus.d, 0.0);
    for (int i = 0; i < sent.m; ++i) {
        const double* f = corpus.token_features(sid, i);
        for (int j = 0; j < corpus.d; ++j) x[j] += f[j];
    }
    for (auto& v : x) v /= sent.m;
    return x;
}

inline TokenProbMatrix predict_token_probs(const ToyLearner& L, const SyntheticCorpus& corpus, int sid,
                                           std::size_t task) {
    require(corpus.tasks[task].kind == TaskKind::token, "predict_token_probs: not a token task");
    const auto& sent = corpus.sentences[sid];
    TokenProbMatrix out;
    out.tokens = sent.m;
    out.labels = corpus.tasks[task].label_count;
    out.probs.reserve(out.tokens * out.labels);
    for (int i = 0; i < sent.m; ++i) {
        auto p = L.forward(task, corpus.token_features(sid, i)).p;
        out.probs.insert(out.probs.end(), p.begin(), p.end());
    }
    return out;
}

inline SentenceProbVector predict_sentence_probs(const ToyLearner& L, const SyntheticCorpus& corpus, int sid,
                                                 std::size_t task) {
    require(corpus.tasks[task].kind == TaskKind::sentence, "predict_sentence_probs: not a sentence task");
    const auto x = pooled_features(corpus, sid);
    return SentenceProbVector{L.forward(task, x.data()).p};
}

// k stochastic passes with per-feature Bernoulli masking (inverted scaling,
// so expectations match the clean forward). rate 0 consumes no randomness
// and every pass is identical.
inline PredictionEnsemble dropout_ensemble(const ToyLearner& L, const SyntheticCorpus& corpus, int sid,
                                           std::size_t task, int passes, double rate, std::uint64_t seed) {
    require(passes >= 2, "dropout_ensemble: need at least two passes");
    require(rate >= 0.0 && rate < 1.0, "dropout_ensemble: rate outside [0,1)");
    const auto& sent = corpus.sentences[sid];
    const bool token_task = corpus.tasks[task].kind == TaskKind::token;

    PredictionEnsemble ens;
    ens.passes.reserve(passes);
    for (int pass = 0; pass < passes; ++pass) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(pass)));
        std::vector<double> feats = sent.feats;
        if (rate > 0.0) {
            const double scale = 1.0 / (1.0 - rate);
            for (auto& v : feats) v = rng.next_unit() < rate ? 0.0 : v * scale;
        }
        std::vector<int> row;
        if (token_task) {
            row.resize(sent.m);
            for (int i = 0; i < sent.m; ++i) {
                const auto p = L.forward(task, feats.data() + static_cast<std::size_t>(i) * corpus.d).p;
                row[i] = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            }
        } else {
            std::vector<double> x(corpus.d, 0.0);
            for (int i = 0; i < sent.m; ++i)
                for (int j = 0; j < corpus.d; ++j) x[j] += feats[static_cast<std::size_t>(i) * corpus.d + j];
            for (auto& v : x) v /= sent.m;
            const auto p = L.forward(task, x.data()).p;
            row.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
        }
        ens.passes.push_back(std::move(row));
    }
    return ens;
}

// F1 for token tasks, accuracy for sentence tasks.
inline double evaluate(const std::vector<int>& pred, const std::vector<int>& gold, TaskKind kind) {
    return kind == TaskKind::token ? micro_f1_nonnull(pred, gold) : sentence_accuracy(pred, gold);
}

struct TaskMetrics {
    double f1 = 0.0;
    double accuracy = 0.0;
    double primary = 0.0;  // f1 for token tasks, accuracy for sentence tasks
};

namespace detail {

inline void collect_predictions(const ToyLearner& L, const SyntheticCorpus& corpus, const std::vector<int>& ids,
                                std::size_t task, std::vector<int>& pred, std::vector<int>& gold) {
    pred.clear();
    gold.clear();
    if (corpus.tasks[task].kind == TaskKind::token) {
        for (int sid : ids) {
            const auto probs = predict_token_probs(L, corpus, sid, task);
            const auto& g = token_gold(corpus, sid, task);
            for (std::size_t i = 0; i < probs.tokens; ++i) {
                const double* row = probs.probs.data() + i * probs.labels;
                pred.push_back(static_cast<int>(std::max_element(row, row + probs.labels) - row));
                gold.push_back(g[i]);
            }
        }
    } else {
        for (int sid : ids) {
            const auto probs = predict_sentence_probs(L, corpus, sid, task);
            pred.push_back(static_cast<int>(
                std::max_element(probs.probs.begin(), probs.probs.end()) - probs.probs.begin()));
            gold.push_back(sentence_gold(corpus, sid));
        }
    }
}

} // namespace detail

inline TaskMetrics evaluate_task(const ToyLearner& L, const SyntheticCorpus& corpus, const std::vector<int>& ids,
                                 std::size_t task) {
    std::vector<int> pred, gold;
    detail::collect_predictions(L, corpus, ids, task, pred, gold);
    TaskMetrics m;
    m.f1 = micro_f1_nonnull(pred, gold);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == gold[i]) ++hits;
    m.accuracy = static_cast<double>(hits) / static_cast<double>(pred.size());
    m.primary = corpus.tasks[task].kind == TaskKind::token ? m.f1 : m.accuracy;
    return m;
}

// Geometric mean of the per-task dev scores; the early-stopping signal.
inline double dev_score(const ToyLearner& L, const SyntheticCorpus& corpus) {
    std::vector<double> per_task;
    for (std::size_t task = 0; task < corpus.tasks.size(); ++task)
        per_task.push_back(evaluate_task(L, corpus, corpus.dev_ids, task).primary);
    return geometric_mean(per_task);
}

struct TrainResult {
    ToyLearner learner;
    double dev_score = 0.0;
    int epochs_run = 0;
};

namespace detail {

struct Gradients {
    std::vector<double> W_s, b_s;
    struct Head {
        std::vector<double> W_u, b_u, W_g, b_g, W_d, b_d;
    };
    std::vector<Head> heads;

    explicit Gradients(const ToyLearner& L) {
        W_s.assign(L.W_s.size(), 0.0);
        b_s.assign(L.b_s.size(), 0.0);
        heads.resize(L.heads.size());
        for (std::size_t t = 0; t < L.heads.size(); ++t) {
            heads[t].W_u.assign(L.heads[t].W_u.size(), 0.0);
            heads[t].b_u.assign(L.heads[t].b_u.size(), 0.0);
            heads[t].W_g.assign(L.heads[t].W_g.size(), 0.0);
            heads[t].b_g.assign(L.heads[t].b_g.size(), 0.0);
            heads[t].W_d.assign(L.heads[t].W_d.size(), 0.0);
            heads[t].b_d.assign(L.heads[t].b_d.size(), 0.0);
        }
    }

    void reset() {
        auto zero = [](std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); };
        zero(W_s);
        zero(b_s);
        for (auto& h : heads) {
            zero(h.W_u);
            zero(h.b_u);
            zero(h.W_g);
            zero(h.b_g);
            zero(h.W_d);
            zero(h.b_d);
        }
    }
};

// Softmax cross-entropy against a (possibly smoothed) target simplifies to
// dL/dz = p - target; everything upstream is chain rule through the gate.
inline void accumulate_item(const ToyLearner& L, std::size_t task, const double* x,
                            const std::vector<double>& target, double scale, Gradients& grad) {
    const auto& head = L.heads[task];
    auto& ghead = grad.heads[task];
    const int h = L.h;
    const int d = L.d;
    const int s = L.tasks[task].label_count;
    const auto tr = L.forward(task, x);

    std::vector<double> dz(s);
    for (int i = 0; i < s; ++i) dz[i] = scale * (tr.p[i] - target[i]);

    std::vector<double> dg(h, 0.0);
    for (int i = 0; i < s; ++i) {
        const double* row = head.W_d.data() + static_cast<std::size_t>(i) * h;
        double* grow = ghead.W_d.data() + static_cast<std::size_t>(i) * h;
        for (int j = 0; j < h; ++j) {
            grow[j] += dz[i] * tr.g[j];
            dg[j] += row[j] * dz[i];
        }
        ghead.b_d[i] += dz[i];
    }

    std::vector<double> de_u(h);
    if (L.multi_task) {
        std::vector<double> dpre(h);
        for (int i = 0; i < h; ++i) {
            const double da = dg[i] * (tr.e_s[i] - tr.e_u[i]);
            dpre[i] = da * tr.a[i] * (1.0 - tr.a[i]);
        }
        std::vector<double> de_s(h);
        for (int i = 0; i < h; ++i) {
            de_s[i] = dg[i] * tr.a[i];
            de_u[i] = dg[i] * (1.0 - tr.a[i]);
        }
        for (int i = 0; i < h; ++i) {
            const double* row = head.W_g.data() + static_cast<std::size_t>(i) * 2 * h;
            double* grow = ghead.W_g.data() + static_cast<std::size_t>(i) * 2 * h;
            for (int j = 0; j < h; ++j) {
                grow[j] += dpre[i] * tr.e_s[j];
                grow[h + j] += dpre[i] * tr.e_u[j];
                de_s[j] += row[j] * dpre[i];
                de_u[j] += row[h + j] * dpre[i];
            }
            ghead.b_g[i] += dpre[i];
        }
        for (int i = 0; i < h; ++i) {
            double* grow = grad.W_s.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) grow[j] += de_s[i] * x[j];
            grad.b_s[i] += de_s[i];
        }
    } else {
        de_u = dg;
    }
    for (int i = 0; i < h; ++i) {
        double* grow = ghead.W_u.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) grow[j] += de_u[i] * x[j];
        ghead.b_u[i] += de_u[i];
    }
}

inline void apply_step(ToyLearner& L, const Gradients& grad, double lr) {
    auto step = [lr](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    };
    if (L.multi_task) {
        step(L.W_s, grad.W_s);
        step(L.b_s, grad.b_s);
    }
    for (std::size_t t = 0; t < L.heads.size(); ++t) {
        step(L.heads[t].W_u, grad.heads[t].W_u);
        step(L.heads[t].b_u, grad.heads[t].b_u);
        if (L.multi_task) {
            step(L.heads[t].W_g, grad.heads[t].W_g);
            step(L.heads[t].b_g, grad.heads[t].b_g);
        }
        step(L.heads[t].W_d, grad.heads[t].W_d);
        step(L.heads[t].b_d, grad.heads[t].b_d);
    }
}

} // namespace detail

// Full-batch gradient descent over every task's labeled sentences, early
// stopping on the dev geometric mean with the best parameters kept. Each
// task's loss is averaged over its own item count so unequal labeled-set
// sizes do not skew the shared encoder.
inline TrainResult train_learner(const SyntheticCorpus& corpus,
                                 const std::vector<std::vector<int>>& labeled_per_task, bool multi_task,
                                 const TrainParams& params) {
    params.validate();
    require(labeled_per_task.size() == corpus.tasks.size(), "train_learner: labeled sets != tasks");
    for (const auto& l : labeled_per_task)
        require(!l.empty(), "train_learner: empty labeled set");

    ToyLearner L = ToyLearner::init(corpus.d, params.hidden, corpus.tasks, multi_task,
                                    derive_seed(params.seed, 0));

    TrainResult best;
    best.learner = L;
    best.dev_score = dev_score(L, corpus);
    best.epochs_run = 0;

    // Per-task item counts (tokens for token tasks, sentences otherwise).
    std::vector<double> item_count(corpus.tasks.size(), 0.0);
    for (std::size_t task = 0; task < corpus.tasks.size(); ++task) {
        if (corpus.tasks[task].kind == TaskKind::token) {
            for (int sid : labeled_per_task[task]) item_count[task] += corpus.sentences[sid].m;
        } else {
            item_count[task] = static_cast<double>(labeled_per_task[task].size());
        }
    }

    detail::Gradients grad(L);
    int since_improve = 0;
    for (int epoch = 1; epoch <= params.epochs; ++epoch) {
        grad.reset();
        for (std::size_t task = 0; task < corpus.tasks.size(); ++task) {
            const int s = corpus.tasks[task].label_count;
            const double scale = 1.0 / item_count[task];
            auto target_for = [&](int gold) {
                if (params.loss == LossMode::label_smoothing)
                    return label_smoothing_targets(static_cast<std::size_t>(gold), s, params.ls_alpha);
                std::vector<double> t(s, 0.0);
                t[gold] = 1.0;
                return t;
            };
            if (corpus.tasks[task].kind == TaskKind::token) {
                for (int sid : labeled_per_task[task]) {
                    const auto& gold = token_gold(corpus, sid, task);
                    for (int i = 0; i < corpus.sentences[sid].m; ++i)
                        detail::accumulate_item(L, task, corpus.token_features(sid, i), target_for(gold[i]),
                                                scale, grad);
                }
            } else {
                for (int sid : labeled_per_task[task]) {
                    const auto x = pooled_features(corpus, sid);
                    detail::accumulate_item(L, task, x.data(), target_for(sentence_gold(corpus, sid)), scale,
                                            grad);
                }
            }
        }
        detail::apply_step(L, grad, params.lr);

        const double score = dev_score(L, corpus);
        if (score > best.dev_score) {
            best.learner = L;
            best.dev_score = score;
            best.epochs_run = epoch;
            since_improve = 0;
        } else if (++since_improve >= params.patience) {
            break;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Selection strategy registry
// ---------------------------------------------------------------------------

enum class StrategyId {
    st_r,
    st_ec,
    st_da,
    mt_r,
    mt_ec,
    mt_da,
    mt_avg,
    mt_avgda,
    mt_max,
    mt_min,
    mt_par,
    mt_rrf,
    mt_ind,
};

inline const char* to_string(StrategyId id) {
    switch (id) {
        case StrategyId::st_r: return "ST-R";
        case StrategyId::st_ec: return "ST-EC";
        case StrategyId::st_da: return "ST-DA";
        case StrategyId::mt_r: return "MT-R";
        case StrategyId::mt_ec: return "MT-EC";
        case StrategyId::mt_da: return "MT-DA";
        case StrategyId::mt_avg: return "MT-AVG";
        case StrategyId::mt_avgda: return "MT-AVGDA";
        case StrategyId::mt_max: return "MT-MAX";
        case StrategyId::mt_min: return "MT-MIN";
        case StrategyId::mt_par: return "MT-PAR";
        case StrategyId::mt_rrf: return "MT-RRF";
        default: return "MT-IND";
    }
}

inline const std::vector<StrategyId>& all_strategies() {
    static const std::vector<StrategyId> all = {
        StrategyId::st_r,  StrategyId::st_ec,  StrategyId::st_da, StrategyId::mt_r,
        StrategyId::mt_ec, StrategyId::mt_da,  StrategyId::mt_avg, StrategyId::mt_avgda,
        StrategyId::mt_max, StrategyId::mt_min, StrategyId::mt_par, StrategyId::mt_rrf,
        StrategyId::mt_ind,
    };
    return all;
}

inline std::optional<StrategyId> parse_strategy(const std::string& name) {
    for (auto id : all_strategies())
        if (name == to_string(id)) return id;
    return std::nullopt;
}

// Single-task strategies score the pool with unshared per-task models.
inline bool single_task_strategy(StrategyId id) {
    return id == StrategyId::st_r || id == StrategyId::st_ec || id == StrategyId::st_da;
}

inline bool uses_dropout_agreement(StrategyId id) {
    return id == StrategyId::st_da || id == StrategyId::mt_da || id == StrategyId::mt_avgda;
}

struct SelectionParams {
    std::size_t n = 1;
    std::optional<double> beta;
    std::size_t selection_task = 0;  // single-column strategies score this task
    std::uint64_t seed = 0;          // random strategies only
};

// Dispatch a registry name over a scored pool. n is clamped to the pool.
inline SelectionResult select_from_matrix(const ConfidenceMatrix& cm, StrategyId id,
                                          const SelectionParams& params) {
    cm.validate();
    require(params.selection_task < cm.tasks(), "select_from_matrix: selection task out of range");
    if (params.beta) require(*params.beta >= 0.0 && *params.beta <= 1.0, "select_from_matrix: beta outside [0,1]");
    const std::size_t n = std::min(params.n, cm.examples());

    SelectionResult res;
    switch (id) {
        case StrategyId::st_r:
        case StrategyId::mt_r:
            res = random_select(cm.ids, n, params.seed, cm.tasks());
            break;
        case StrategyId::st_ec:
        case StrategyId::st_da:
        case StrategyId::mt_ec:
        case StrategyId::mt_da:
            res = rank_by_confidence(cm.column(params.selection_task), cm.ids, n, cm.tasks());
            break;
        case StrategyId::mt_avg: {
            const auto scheme =
                params.beta ? AggregationScheme::beta_weighted(*params.beta) : AggregationScheme::avg();
            res = rank_by_confidence(aggregate_confidences(cm, scheme), cm.ids, n, cm.tasks());
            break;
        }
        case StrategyId::mt_avgda:
            res = rank_by_confidence(aggregate_confidences(cm, AggregationScheme::avgda()), cm.ids, n,
                                     cm.tasks());
            break;
        case StrategyId::mt_max:
            res = rank_by_confidence(aggregate_confidences(cm, AggregationScheme::max()), cm.ids, n,
                                     cm.tasks());
            break;
        case StrategyId::mt_min:
            res = rank_by_confidence(aggregate_confidences(cm, AggregationScheme::min()), cm.ids, n,
                                     cm.tasks());
            break;
        case StrategyId::mt_par: {
            std::vector<ParetoPoint> points;
            points.reserve(cm.examples());
            for (std::size_t i = 0; i < cm.examples(); ++i) {
                std::vector<double> c(cm.tasks());
                for (std::size_t j = 0; j < cm.tasks(); ++j) c[j] = cm.at(i, j);
                points.push_back({cm.ids[i], std::move(c)});
            }
            ParetoConfig cfg;
            cfg.n = n;
            cfg.beta = params.beta;
            res = pareto_select(points, cfg);
            break;
        }
        case StrategyId::mt_rrf: {
            const auto rrf = params.beta ? RRFParams::beta_weighted(*params.beta) : RRFParams{};
            res = rrf_select(cm, n, rrf);
            break;
        }
        case StrategyId::mt_ind: {
            std::vector<double> split;
            if (params.beta) split = {1.0 - *params.beta, *params.beta};
            res = ind_select(cm, n, std::move(split));
            break;
        }
    }
    res.strategy = to_string(id);
    return res;
}

// ---------------------------------------------------------------------------
// The active-learning loop
// ---------------------------------------------------------------------------

enum class BudgetRegime { grd_al, blp_al, blp };

inline const char* to_string(BudgetRegime r) {
    switch (r) {
        case BudgetRegime::grd_al: return "GRD_AL";
        case BudgetRegime::blp_al: return "BLP_AL";
        default: return "BLP";
    }
}

inline std::optional<BudgetRegime> parse_budget_regime(const std::string& name) {
    if (name == "GRD_AL") return BudgetRegime::grd_al;
    if (name == "BLP_AL") return BudgetRegime::blp_al;
    if (name == "BLP") return BudgetRegime::blp;
    return std::nullopt;
}

// GRD_AL spends B greedily every iteration; BLP_AL solves a program with B
// every iteration; BLP solves once up front with the whole T*B budget.
struct BudgetMode {
    BudgetRegime regime = BudgetRegime::grd_al;
    Formulation formulation = Formulation::joint;
    std::int64_t budget = 500;
};

struct ALExperimentConfig {
    Scenario scenario = Scenario::complementary;
    StrategyId strategy = StrategyId::mt_avg;
    std::optional<double> beta;
    std::size_t selection_task = 0;
    int iterations = 5;
    double initial_fraction = 0.02;
    std::optional<std::size_t> acquisition;  // per-iteration count; defaults to the initial size
    std::optional<BudgetMode> budget;
    int dropout_passes = 10;
    double dropout_rate = 0.1;
    TrainParams train;     // seed field ignored; derived from the master seed
    CorpusConfig corpus;   // dev_size overridden to twice the initial size
    std::uint64_t seed = 0;

    void validate() const {
        corpus.validate();
        train.validate();
        require(iterations >= 1, "ALExperimentConfig: iterations must be >= 1");
        require(initial_fraction > 0.0 && initial_fraction <= 1.0,
                "ALExperimentConfig: initial_fraction outside (0,1]");
        require(dropout_passes >= 2, "ALExperimentConfig: dropout_passes must be >= 2");
        require(dropout_rate >= 0.0 && dropout_rate < 1.0, "ALExperimentConfig: dropout_rate outside [0,1)");
        require(selection_task < 2, "ALExperimentConfig: selection_task out of range");
        if (beta) require(*beta >= 0.0 && *beta <= 1.0, "ALExperimentConfig: beta outside [0,1]");
        if (budget) require(budget->budget >= 0, "ALExperimentConfig: negative budget");
        if (acquisition) require(*acquisition >= 1, "ALExperimentConfig: acquisition must be >= 1");
    }
};

struct IterationRecord {
    int iteration = 0;  // 1-based
    double labeled_fraction = 0.0;                // of the train split, at training time
    std::vector<std::size_t> labeled_per_task;
    std::size_t labeled_total = 0;                // examples with any task labeled
    std::int64_t labeled_cost = 0;                // cumulative annotation cost at training time
    std::vector<TaskMetrics> test;
    double dev_score = 0.0;
    double pool_oe = 0.0;
    std::vector<std::int64_t> selected_ids;       // selection order
    std::vector<std::vector<bool>> selected_flags;
    std::int64_t selection_cost = 0;
};

struct ALRunRecord {
    std::string strategy;
    std::uint64_t seed = 0;
    bool pool_exhausted = false;
    std::vector<IterationRecord> iterations;
    std::vector<TaskMetrics> final_test;
    double final_macro = 0.0;   // mean of per-task primary metrics at the last iteration
    double mean_pool_oe = 0.0;  // across iterations
};

namespace detail {

// Seed streams per consumer; offsets keep iterations independent.
constexpr std::uint64_t kSeedCorpus = 11;
constexpr std::uint64_t kSeedInitial = 12;
constexpr std::uint64_t kSeedTrain = 100;
constexpr std::uint64_t kSeedSelect = 200;
constexpr std::uint64_t kSeedDropout = 300;

inline double example_entropy_confidence(const ToyLearner& L, const SyntheticCorpus& corpus, int sid,
                                         std::size_t task) {
    if (corpus.tasks[task].kind == TaskKind::token)
        return token_entropy_confidence(predict_token_probs(L, corpus, sid, task));
    return sentence_entropy_confidence(predict_sentence_probs(L, corpus, sid, task));
}

inline CalibrationSample example_calibration(const ToyLearner& L, const SyntheticCorpus& corpus, int sid,
                                             std::size_t task) {
    CalibrationSample s;
    if (corpus.tasks[task].kind == TaskKind::token) {
        const auto probs = predict_token_probs(L, corpus, sid, task);
        const auto& gold = token_gold(corpus, sid, task);
        double conf = 0.0;
        double hits = 0.0;
        for (std::size_t i = 0; i < probs.tokens; ++i) {
            const double* row = probs.probs.data() + i * probs.labels;
            const auto arg = std::max_element(row, row + probs.labels) - row;
            conf += row[arg];
            if (static_cast<int>(arg) == gold[i]) hits += 1.0;
        }
        s.conf = conf / static_cast<double>(probs.tokens);
        s.acc = hits / static_cast<double>(probs.tokens);
    } else {
        const auto probs = predict_sentence_probs(L, corpus, sid, task);
        const auto arg =
            std::max_element(probs.probs.begin(), probs.probs.end()) - probs.probs.begin();
        s.conf = probs.probs[arg];
        s.acc = static_cast<int>(arg) == sentence_gold(corpus, sid) ? 1.0 : 0.0;
    }
    return s;
}

} // namespace detail

// Algorithm: train on the labeled set, score the pool, select, reveal, repeat.
// Single-task strategies score each task with its own unshared model; the
// model whose task is `selection_task` drives single-column selection either
// way. Selected examples leave the pool even when only one task's label was
// bought. Fully deterministic for a given config.
inline ALRunRecord run_al_experiment(const ALExperimentConfig& cfg) {
    cfg.validate();

    const auto initial_size = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(cfg.initial_fraction * static_cast<double>(cfg.corpus.train_size))));

    CorpusConfig corpus_cfg = cfg.corpus;
    corpus_cfg.dev_size = static_cast<int>(2 * initial_size);
    const auto corpus =
        generate_corpus(cfg.scenario, corpus_cfg, derive_seed(cfg.seed, detail::kSeedCorpus));
    const auto costs = compute_costs(corpus.sizes());
    const std::size_t tasks = corpus.tasks.size();

    // Initial labeled set: a uniform sample annotated for every task.
    std::vector<std::int64_t> draw(corpus.train_ids.begin(), corpus.train_ids.end());
    Rng init_rng(derive_seed(cfg.seed, detail::kSeedInitial));
    init_rng.partial_shuffle(draw, initial_size);
    draw.resize(initial_size);
    std::sort(draw.begin(), draw.end());

    std::vector<std::vector<int>> labeled(tasks);
    for (auto sid : draw)
        for (auto& l : labeled) l.push_back(static_cast<int>(sid));

    std::vector<int> pool;
    {
        std::vector<bool> taken(corpus.sentences.size(), false);
        for (auto sid : draw) taken[sid] = true;
        for (int sid : corpus.train_ids)
            if (!taken[sid]) pool.push_back(sid);
    }

    std::int64_t labeled_cost = 0;
    std::size_t labeled_total = initial_size;
    for (auto sid : draw) labeled_cost += costs.jcost[sid];

    ALRunRecord record;
    record.strategy = to_string(cfg.strategy);
    record.seed = cfg.seed;

    const bool multi_task = !single_task_strategy(cfg.strategy);
    const std::size_t acquisition = cfg.acquisition.value_or(initial_size);

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        IterationRecord rec;
        rec.iteration = iter;
        rec.labeled_fraction = static_cast<double>(labeled_total) / cfg.corpus.train_size;
        for (const auto& l : labeled) rec.labeled_per_task.push_back(l.size());
        rec.labeled_total = labeled_total;
        rec.labeled_cost = labeled_cost;

        TrainParams tp = cfg.train;
        tp.seed = derive_seed(cfg.seed, detail::kSeedTrain + static_cast<std::uint64_t>(iter));
        const auto trained = train_learner(corpus, labeled, multi_task, tp);
        const auto& L = trained.learner;
        rec.dev_score = trained.dev_score;

        for (std::size_t task = 0; task < tasks; ++task)
            rec.test.push_back(evaluate_task(L, corpus, corpus.test_ids, task));

        if (!pool.empty()) {
            std::vector<CalibrationSample> calibration;
            calibration.reserve(pool.size() * tasks);
            for (int sid : pool)
                for (std::size_t task = 0; task < tasks; ++task)
                    calibration.push_back(detail::example_calibration(L, corpus, sid, task));
            rec.pool_oe = overconfidence_error(calibration);
        }

        if (pool.empty()) {
            record.pool_exhausted = true;
            record.iterations.push_back(std::move(rec));
            break;
        }

        // Score the pool. Budget selection always works on entropy
        // confidence; otherwise the strategy decides the score kind.
        const bool want_da = !cfg.budget && uses_dropout_agreement(cfg.strategy);
        ConfidenceMatrix cm;
        cm.ids.assign(pool.begin(), pool.end());
        cm.kinds.assign(tasks, want_da ? ScoreKind::dropout_agreement : ScoreKind::entropy_confidence);
        cm.scores.reserve(pool.size() * tasks);
        const auto dropout_seed = derive_seed(cfg.seed, detail::kSeedDropout + static_cast<std::uint64_t>(iter));
        for (int sid : pool) {
            for (std::size_t task = 0; task < tasks; ++task) {
                if (want_da) {
                    const auto ens = dropout_ensemble(L, corpus, sid, task, cfg.dropout_passes,
                                                      cfg.dropout_rate,
                                                      derive_seed(dropout_seed, static_cast<std::uint64_t>(sid)));
                    cm.scores.push_back(dropout_agreement(ens));
                } else {
                    cm.scores.push_back(detail::example_entropy_confidence(L, corpus, sid, task));
                }
            }
        }

        SelectionResult sel;
        if (cfg.budget) {
            const bool solve_now = cfg.budget->regime != BudgetRegime::blp || iter == 1;
            const std::int64_t budget = cfg.budget->regime == BudgetRegime::blp
                                            ? cfg.budget->budget * cfg.iterations
                                            : cfg.budget->budget;
            if (!solve_now) {
                sel.strategy = to_string(cfg.budget->regime);
            } else if (cfg.budget->regime == BudgetRegime::grd_al) {
                std::vector<double> mean_conf(pool.size(), 0.0);
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    for (std::size_t task = 0; task < tasks; ++task) mean_conf[i] += cm.at(i, task);
                    mean_conf[i] /= static_cast<double>(tasks);
                }
                std::vector<std::int64_t> jcost(pool.size());
                for (std::size_t i = 0; i < pool.size(); ++i) jcost[i] = costs.jcost[pool[i]];
                sel = greedy_budgeted_select(mean_conf, cm.ids, jcost, budget, tasks);
            } else {
                BudgetProgram program;
                program.formulation = cfg.budget->formulation;
                program.stcs_task = cfg.selection_task;
                program.ids = cm.ids;
                program.budget = budget;
                program.uncertainty.resize(pool.size(), std::vector<double>(tasks));
                for (std::size_t i = 0; i < pool.size(); ++i)
                    for (std::size_t task = 0; task < tasks; ++task)
                        program.uncertainty[i][task] = 1.0 - cm.at(i, task);
                for (int sid : pool) {
                    program.costs.cost_sf.push_back(costs.cost_sf[sid]);
                    program.costs.cost_id.push_back(costs.cost_id[sid]);
                    program.costs.jcost.push_back(costs.jcost[sid]);
                }
                const auto solution = solve_budget_program(program);
                for (std::size_t i = 0; i < pool.size(); ++i) {
                    bool any = false;
                    for (bool f : solution.x[i]) any = any || f;
                    if (!any) continue;
                    sel.ids.push_back(cm.ids[i]);
                    sel.task_flags.push_back(solution.x[i]);
                }
                sel.strategy = to_string(cfg.budget->formulation);
                sel.total_cost = solution.total_cost;
            }
        } else {
            SelectionParams sp;
            sp.n = acquisition;
            sp.beta = cfg.beta;
            sp.selection_task = cfg.selection_task;
            sp.seed = derive_seed(cfg.seed, detail::kSeedSelect + static_cast<std::uint64_t>(iter));
            sel = select_from_matrix(cm, cfg.strategy, sp);
        }

        // Reveal: labels move to the per-task labeled sets, the example
        // leaves the pool even when only one task was annotated.
        std::vector<bool> drop(corpus.sentences.size(), false);
        for (std::size_t i = 0; i < sel.ids.size(); ++i) {
            const int sid = static_cast<int>(sel.ids[i]);
            drop[sid] = true;
            ++labeled_total;
            const auto& flags = sel.task_flags[i];
            bool all = true, any = false;
            for (std::size_t task = 0; task < tasks; ++task) {
                if (flags[task]) {
                    labeled[task].push_back(sid);
                    any = true;
                } else {
                    all = false;
                }
            }
            require(any, "run_al_experiment: selected example with no task annotation");
            if (all)
                rec.selection_cost += costs.jcost[sid];
            else
                rec.selection_cost += flags[0] ? costs.cost_sf[sid] : costs.cost_id[sid];
        }
        for (auto& l : labeled) std::sort(l.begin(), l.end());
        labeled_cost += rec.selection_cost;

        std::vector<int> next_pool;
        next_pool.reserve(pool.size());
        for (int sid : pool)
            if (!drop[sid]) next_pool.push_back(sid);
        pool = std::move(next_pool);

        rec.selected_ids = sel.ids;
        rec.selected_flags = sel.task_flags;
        record.iterations.push_back(std::move(rec));
    }

    const auto& last = record.iterations.back();
    record.final_test = last.test;
    double macro = 0.0;
    for (const auto& m : record.final_test) macro += m.primary;
    record.final_macro = macro / static_cast<double>(record.final_test.size());
    double oe = 0.0;
    for (const auto& it : record.iterations) oe += it.pool_oe;
    record.mean_pool_oe = oe / static_cast<double>(record.iterations.size());
    return record;
}

} // namespace mtal
