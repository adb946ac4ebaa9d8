#pragma once

// Sequential predictors, per-step regret against a ground-truth source, and
// the per-sequence / aggregate regret reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <regex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "solgen/voms_ctw.hpp"

namespace solgen {

inline constexpr double kProbabilityFloor = 1e-12;

class Predictor {
public:
    virtual ~Predictor() = default;
    virtual std::string name() const = 0;
    virtual int alphabet_size() const = 0;
    virtual void reset() = 0;
    // Next-symbol distribution given everything observed so far.
    virtual std::vector<double> predict() const = 0;
    virtual void observe(int symbol) = 0;
};

class UniformPredictor final : public Predictor {
public:
    explicit UniformPredictor(int alphabet) : k_(alphabet) {
        if (alphabet < 1) throw std::invalid_argument("UniformPredictor: empty alphabet");
    }
    std::string name() const override { return "uniform"; }
    int alphabet_size() const override { return k_; }
    void reset() override {}
    std::vector<double> predict() const override { return std::vector<double>(static_cast<std::size_t>(k_), 1.0 / k_); }
    void observe(int) override {}

private:
    int k_;
};

class CtwBaseline final : public Predictor {
public:
    explicit CtwBaseline(std::uint32_t depth) : ctw_(depth) {}
    std::string name() const override { return "ctw(" + std::to_string(ctw_.depth()) + ")"; }
    int alphabet_size() const override { return 2; }
    void reset() override { ctw_.reset(); }
    std::vector<double> predict() const override {
        const double p0 = ctw_.probability(0);
        return {p0, 1.0 - p0};
    }
    void observe(int symbol) override { ctw_.update(symbol); }

private:
    CtwPredictor ctw_;
};

class KtBaseline final : public Predictor {
public:
    explicit KtBaseline(std::uint32_t order) : kt_(order) {}
    std::string name() const override { return "kt(" + std::to_string(kt_.order()) + ")"; }
    int alphabet_size() const override { return 2; }
    void reset() override { kt_.reset(); }
    std::vector<double> predict() const override {
        const double p0 = kt_.probability(0);
        return {p0, 1.0 - p0};
    }
    void observe(int symbol) override { kt_.update(symbol); }

private:
    KtPredictor kt_;
};

struct UnknownBaseline : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// "uniform", "ctw(D)", "kt(k)". solomonoff_ub is a batch bound, not a
// predictor; see solomonoff_upper_bound.
inline std::unique_ptr<Predictor> make_baseline(const std::string& name, int alphabet) {
    static const std::regex parametric(R"((ctw|kt)\((\d+)\))");
    std::smatch m;
    if (name == "uniform") return std::make_unique<UniformPredictor>(alphabet);
    if (std::regex_match(name, m, parametric)) {
        if (alphabet != 2) throw std::invalid_argument(name + ": binary predictor on alphabet " + std::to_string(alphabet));
        const auto d = static_cast<std::uint32_t>(std::stoul(m[2]));
        if (m[1] == "ctw") return std::make_unique<CtwBaseline>(d);
        return std::make_unique<KtBaseline>(d);
    }
    if (name == "solomonoff_ub") {
        throw UnknownBaseline("solomonoff_ub is a per-batch loss bound, not a predictor");
    }
    throw UnknownBaseline("unknown baseline '" + name + "'");
}

// log mu - log pi in nats, with pi floored at 1e-12.
inline double instantaneous_regret(double mu, double pi, bool* clamped = nullptr) {
    const bool clamp = pi < kProbabilityFloor;
    if (clamped) *clamped = clamp;
    return std::log(mu) - std::log(clamp ? kProbabilityFloor : pi);
}

// One sequence with its ground truth. mu[t] is the source probability of
// tokens[t] given the prefix; regret and accuracy count positions with mask 1.
struct EvalSequence {
    std::uint64_t seed = 0;
    int alphabet = 2;
    std::vector<std::uint8_t> tokens;
    std::vector<std::uint8_t> mask;
    std::vector<double> mu;
    std::vector<std::pair<std::string, std::string>> groups;  // key, value
};

struct SequenceResult {
    std::uint64_t seed = 0;
    std::size_t scored = 0;        // masked positions
    double cumulative_regret = 0;  // R^T at the last position
    double log_loss = 0;           // -sum log pi over masked positions
    std::size_t correct = 0;       // argmax hits over masked positions
    std::size_t clamps = 0;
    std::vector<double> cumulative;  // R^t for t = 1..len
    std::vector<std::pair<std::string, std::string>> groups;

    double accuracy() const { return scored == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(scored); }
};

struct MeanStderr {
    std::size_t count = 0;
    double mean = 0;
    double stderr_ = 0;
};

inline MeanStderr mean_stderr(std::span<const double> xs) {
    MeanStderr m;
    m.count = xs.size();
    if (xs.empty()) return m;
    double s = 0;
    for (double x : xs) s += x;
    m.mean = s / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double v = 0;
        for (double x : xs) v += (x - m.mean) * (x - m.mean);
        v /= static_cast<double>(xs.size() - 1);
        m.stderr_ = std::sqrt(v / static_cast<double>(xs.size()));
    }
    return m;
}

struct RegretReport {
    std::string predictor;
    bool bits = false;  // report in bits instead of nats
    std::vector<SequenceResult> sequences;
    std::optional<double> solomonoff_ub;  // batch bound in nats, UTM shards only

    double unit() const { return bits ? 1.0 / std::numbers::ln2 : 1.0; }

    MeanStderr regret() const {
        std::vector<double> xs;
        for (const auto& s : sequences) xs.push_back(s.cumulative_regret);
        return mean_stderr(xs);
    }

    double total_log_loss() const {
        double t = 0;
        for (const auto& s : sequences) t += s.log_loss;
        return t;
    }

    std::size_t clamps() const {
        std::size_t c = 0;
        for (const auto& s : sequences) c += s.clamps;
        return c;
    }

    // Mean R^t over sequences that reach position t.
    std::vector<double> regret_curve() const {
        std::vector<double> sum, n;
        for (const auto& s : sequences) {
            if (s.cumulative.size() > sum.size()) {
                sum.resize(s.cumulative.size());
                n.resize(s.cumulative.size());
            }
            for (std::size_t t = 0; t < s.cumulative.size(); ++t) {
                sum[t] += s.cumulative[t];
                n[t] += 1;
            }
        }
        for (std::size_t t = 0; t < sum.size(); ++t) sum[t] /= n[t];
        return sum;
    }

    // group key -> value -> cumulative-regret statistics.
    std::map<std::string, std::map<std::string, MeanStderr>> grouped() const {
        std::map<std::string, std::map<std::string, std::vector<double>>> raw;
        for (const auto& s : sequences) {
            for (const auto& [k, v] : s.groups) raw[k][v].push_back(s.cumulative_regret);
        }
        std::map<std::string, std::map<std::string, MeanStderr>> out;
        for (const auto& [k, vals] : raw) {
            for (const auto& [v, xs] : vals) out[k][v] = mean_stderr(xs);
        }
        return out;
    }

    void write_tsv(std::ostream& os) const {
        os << "index\tseed\tscored\tcumulative_regret\tlog_loss\taccuracy\tclamps\tgroups\n";
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            const auto& s = sequences[i];
            os << i << '\t' << s.seed << '\t' << s.scored << '\t' << fmt(s.cumulative_regret * unit()) << '\t'
               << fmt(s.log_loss * unit()) << '\t' << fmt(s.accuracy()) << '\t' << s.clamps << '\t';
            for (std::size_t g = 0; g < s.groups.size(); ++g) {
                os << (g ? "," : "") << s.groups[g].first << '=' << s.groups[g].second;
            }
            os << '\n';
        }
    }

    void write_summary(std::ostream& os) const {
        const auto r = regret();
        std::vector<double> acc;
        for (const auto& s : sequences) acc.push_back(s.accuracy());
        const auto a = mean_stderr(acc);
        os << "predictor\t" << predictor << '\n'
           << "unit\t" << (bits ? "bits" : "nats") << '\n'
           << "sequences\t" << r.count << '\n'
           << "mean_cumulative_regret\t" << fmt(r.mean * unit()) << '\n'
           << "stderr_cumulative_regret\t" << fmt(r.stderr_ * unit()) << '\n'
           << "total_log_loss\t" << fmt(total_log_loss() * unit()) << '\n'
           << "mean_accuracy\t" << fmt(a.mean) << '\n'
           << "clamp_events\t" << clamps() << '\n';
        if (solomonoff_ub) os << "solomonoff_ub\t" << fmt(*solomonoff_ub * unit()) << '\n';
        for (const auto& [k, vals] : grouped()) {
            for (const auto& [v, m] : vals) {
                os << "group\t" << k << '=' << v << '\t' << m.count << '\t' << fmt(m.mean * unit()) << '\t'
                   << fmt(m.stderr_ * unit()) << '\n';
            }
        }
        const auto curve = regret_curve();
        os << "curve";
        for (double c : curve) os << '\t' << fmt(c * unit());
        os << '\n';
    }

private:
    static std::string fmt(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
};

inline SequenceResult evaluate_sequence(Predictor& predictor, const EvalSequence& seq) {
    if (seq.alphabet != predictor.alphabet_size()) {
        throw std::invalid_argument("evaluate: predictor " + predictor.name() + " has alphabet " +
                                    std::to_string(predictor.alphabet_size()) + ", sequence has " +
                                    std::to_string(seq.alphabet));
    }
    if (seq.mask.size() != seq.tokens.size() || seq.mu.size() != seq.tokens.size()) {
        throw std::invalid_argument("evaluate: tokens, mask and mu lengths differ");
    }
    SequenceResult r;
    r.seed = seq.seed;
    r.groups = seq.groups;
    r.cumulative.reserve(seq.tokens.size());
    predictor.reset();
    for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
        const int x = seq.tokens[t];
        if (x >= seq.alphabet) throw std::invalid_argument("evaluate: token outside the alphabet");
        if (seq.mask[t]) {
            const auto p = predictor.predict();
            bool clamped = false;
            r.cumulative_regret += instantaneous_regret(seq.mu[t], p[static_cast<std::size_t>(x)], &clamped);
            r.log_loss -= std::log(std::max(p[static_cast<std::size_t>(x)], kProbabilityFloor));
            r.clamps += clamped;
            r.correct += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == x;
            ++r.scored;
        }
        r.cumulative.push_back(r.cumulative_regret);
        predictor.observe(x);
    }
    return r;
}

using PredictorFactory = std::function<std::unique_ptr<Predictor>()>;

// One predictor instance per worker, reset per sequence; results keep the
// input order, so the report does not depend on the worker count.
inline RegretReport evaluate_suite(const PredictorFactory& factory, std::span<const EvalSequence> suite,
                                   unsigned workers = 1) {
    RegretReport report;
    report.predictor = factory()->name();
    report.sequences.resize(suite.size());
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(suite.size(), 1))));
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            auto p = factory();
            for (std::size_t i = w; i < suite.size(); i += workers) report.sequences[i] = evaluate_sequence(*p, suite[i]);
        }));
    }
    for (auto& j : jobs) j.get();
    return report;
}

inline RegretReport evaluate_suite(const std::string& baseline, int alphabet, std::span<const EvalSequence> suite,
                                   unsigned workers = 1) {
    make_baseline(baseline, alphabet);  // validates the name up front
    return evaluate_suite([&] { return make_baseline(baseline, alphabet); }, suite, workers);
}

}  // namespace solgen
