#pragma once

// Exact and Monte-Carlo approximations of the budgeted Solomonoff prior
// M_{s,L,n} over BrainPhoque, with 7^-len program weights.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "solgen/bp_machine.hpp"
#include "solgen/rng.hpp"

namespace solgen {

using Sequence = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kAbsorber = 17;  // the ⊥ token, outside the output alphabet

// Output symbols 0..16 as "0".."9","a".."g"; ⊥ as '#'.
inline char symbol_char(std::uint8_t s) {
    if (s < 10) return static_cast<char>('0' + s);
    if (s < kAlphabetSize) return static_cast<char>('a' + (s - 10));
    return '#';
}

inline std::string sequence_string(std::span<const std::uint8_t> seq) {
    std::string s;
    s.reserve(seq.size());
    for (auto v : seq) s.push_back(symbol_char(v));
    return s;
}

inline Sequence parse_sequence(std::string_view text) {
    Sequence seq;
    for (char c : text) {
        if (c >= '0' && c <= '9') seq.push_back(static_cast<std::uint8_t>(c - '0'));
        else if (c >= 'a' && c < 'a' + kAlphabetSize - 10) seq.push_back(static_cast<std::uint8_t>(10 + c - 'a'));
        else if (c == '#') seq.push_back(kAbsorber);
        else throw std::invalid_argument(std::string("bad output symbol '") + c + "'");
    }
    return seq;
}

struct SampleCorpus {
    std::vector<Sequence> records;
    RunLimits limits;

    std::size_t size() const noexcept { return records.size(); }
};

// J outputs of sample_and_run; sample j uses derive_seed(seed, j).
template <InstructionDistribution D>
SampleCorpus sample_corpus(const D& dist, const RunLimits& limits, std::size_t count, std::uint64_t seed,
                           unsigned workers = 1) {
    SampleCorpus corpus;
    corpus.limits = limits;
    corpus.records.resize(count);
    workers = std::max(1u, workers);
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t j = w; j < count; j += workers) {
                Rng rng(derive_seed(seed, j));
                corpus.records[j] = sample_and_run(dist, limits, rng).output;
            }
        }));
    }
    for (auto& j : jobs) j.get();
    return corpus;
}

// prefix -> number of records that extend or equal it.
class PrefixCounts {
public:
    explicit PrefixCounts(const SampleCorpus& corpus) : total_(corpus.size()) {
        std::string key;
        for (const auto& rec : corpus.records) {
            key.clear();
            ++counts_[key];
            for (auto s : rec) {
                key.push_back(static_cast<char>(s));
                ++counts_[key];
            }
        }
    }

    std::uint64_t count(std::span<const std::uint8_t> prefix) const {
        const std::string key(prefix.begin(), prefix.end());
        auto it = counts_.find(key);
        return it == counts_.end() ? 0 : it->second;
    }

    std::uint64_t total() const noexcept { return total_; }

    // Calls f(prefix, count) for every stored prefix.
    template <class F>
    void for_each(F&& f) const {
        for (const auto& [k, c] : counts_) {
            Sequence s(k.begin(), k.end());
            f(std::span<const std::uint8_t>(s), c);
        }
    }

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_;
};

// Fraction of records that start with x.
inline double empirical_prior(const PrefixCounts& counts, std::span<const std::uint8_t> x) {
    if (counts.total() == 0) throw std::invalid_argument("empirical_prior: empty corpus");
    return static_cast<double>(counts.count(x)) / static_cast<double>(counts.total());
}

inline double empirical_prior(const SampleCorpus& corpus, std::span<const std::uint8_t> x) {
    return empirical_prior(PrefixCounts(corpus), x);
}

struct UndefinedPrefix : std::domain_error {
    using std::domain_error::domain_error;
};

using SymbolDistribution = std::array<double, kAlphabetSize>;

// Next-symbol ratio over records of length >= t that start with x_{<t}.
inline SymbolDistribution empirical_norm_predictive(const PrefixCounts& counts, std::span<const std::uint8_t> prefix) {
    Sequence ext(prefix.begin(), prefix.end());
    ext.push_back(0);
    std::array<std::uint64_t, kAlphabetSize> num{};
    std::uint64_t den = 0;
    for (int a = 0; a < kAlphabetSize; ++a) {
        ext.back() = static_cast<std::uint8_t>(a);
        num[static_cast<std::size_t>(a)] = counts.count(ext);
        den += num[static_cast<std::size_t>(a)];
    }
    if (den == 0) throw UndefinedPrefix("empirical_norm_predictive: no record extends '" + sequence_string(prefix) + "'");
    SymbolDistribution p{};
    for (std::size_t a = 0; a < p.size(); ++a) p[a] = static_cast<double>(num[a]) / static_cast<double>(den);
    return p;
}

inline SymbolDistribution empirical_norm_predictive(const SampleCorpus& corpus, std::span<const std::uint8_t> prefix) {
    return empirical_norm_predictive(PrefixCounts(corpus), prefix);
}

// Keeps only the records that reached length n.
inline SampleCorpus limit_normalized(const SampleCorpus& corpus, std::size_t n) {
    SampleCorpus kept;
    kept.limits = corpus.limits;
    for (const auto& r : corpus.records) {
        if (r.size() >= n) kept.records.push_back(r);
    }
    if (kept.records.empty()) throw std::invalid_argument("limit_normalized: no record has length " + std::to_string(n));
    return kept;
}

enum class PadMode {
    Normalized,  // arbitrary in-alphabet padding (0), loss cut at the real length
    Absorbing,   // ⊥ padding, loss also covers the first ⊥
};

struct PaddedRecord {
    Sequence tokens;
    std::vector<std::uint8_t> mask;
    std::uint32_t real_len = 0;
};

inline PaddedRecord pad_record(std::span<const std::uint8_t> rec, std::size_t n, PadMode mode) {
    PaddedRecord p;
    p.real_len = static_cast<std::uint32_t>(std::min(rec.size(), n));
    p.tokens.assign(rec.begin(), rec.begin() + p.real_len);
    p.mask.assign(p.real_len, 1);
    const std::uint8_t pad = mode == PadMode::Absorbing ? kAbsorber : 0;
    for (std::size_t i = p.real_len; i < n; ++i) {
        p.tokens.push_back(pad);
        p.mask.push_back(mode == PadMode::Absorbing && i == p.real_len ? 1 : 0);
    }
    return p;
}

inline std::vector<PaddedRecord> pad_with_absorber(const SampleCorpus& corpus, std::size_t n, PadMode mode) {
    std::vector<PaddedRecord> out;
    out.reserve(corpus.size());
    for (const auto& r : corpus.records) out.push_back(pad_record(r, n, mode));
    return out;
}

// -(1/J) sum_j sum_{t <= len(x_j)} log pi(x_t | x_{<t}); padding never enters.
// `predictor(prefix, symbol)` returns a probability.
template <class Predictor>
double cut_log_loss(const SampleCorpus& corpus, Predictor&& predictor) {
    if (corpus.size() == 0) return 0.0;
    double loss = 0.0;
    for (const auto& rec : corpus.records) {
        std::span<const std::uint8_t> s(rec);
        for (std::size_t t = 0; t < s.size(); ++t) loss -= std::log(predictor(s.first(t), s[t]));
    }
    return loss / static_cast<double>(corpus.size());
}

// --- exact enumeration ---------------------------------------------------

struct OracleConfig {
    std::uint32_t steps = 200;           // s
    std::uint32_t max_program_len = 8;   // L
    std::uint32_t max_output = 8;        // n
    std::uint32_t guard = 12;            // refuse L above this

    RunLimits limits() const { return RunLimits{steps, max_output, max_program_len}; }
};

inline std::uint64_t pow7(std::uint32_t e) {
    std::uint64_t r = 1;
    for (std::uint32_t i = 0; i < e; ++i) r *= 7;
    return r;
}

// M_{s,L,n}(x) = numerator(x) / 7^L, exactly.
class PriorTable {
public:
    PriorTable() = default;
    PriorTable(OracleConfig cfg, std::map<Sequence, std::uint64_t> numerators)
        : cfg_(cfg), denominator_(pow7(cfg.max_program_len)), numerators_(std::move(numerators)) {}

    const OracleConfig& config() const noexcept { return cfg_; }
    std::uint64_t denominator() const noexcept { return denominator_; }
    const std::map<Sequence, std::uint64_t>& entries() const noexcept { return numerators_; }

    std::uint64_t numerator(std::span<const std::uint8_t> x) const {
        auto it = numerators_.find(Sequence(x.begin(), x.end()));
        return it == numerators_.end() ? 0 : it->second;
    }

    double operator()(std::span<const std::uint8_t> x) const {
        return static_cast<double>(numerator(x)) / static_cast<double>(denominator_);
    }

    // sum_a M(xa) <= M(x) for every stored x, in exact integer arithmetic.
    // Returns the first violating prefix, if any.
    std::optional<Sequence> semimeasure_violation() const {
        std::map<Sequence, std::uint64_t> child_sums;
        for (const auto& [x, num] : numerators_) {
            if (x.empty()) continue;
            child_sums[Sequence(x.begin(), x.end() - 1)] += num;
        }
        for (const auto& [parent, sum] : child_sums) {
            if (sum > numerator(parent)) return parent;
        }
        return std::nullopt;
    }

    // Pointwise this <= other, comparing over the common denominator.
    bool dominated_by(const PriorTable& other) const {
        const std::uint32_t la = cfg_.max_program_len;
        const std::uint32_t lb = other.cfg_.max_program_len;
        const std::uint64_t scale_a = lb > la ? pow7(lb - la) : 1;
        const std::uint64_t scale_b = la > lb ? pow7(la - lb) : 1;
        for (const auto& [x, num] : numerators_) {
            if (num * scale_a > other.numerator(x) * scale_b) return false;
        }
        return true;
    }

    // "prefix<TAB>probability", prefixes in lexicographic order of their text.
    void write(std::ostream& os) const {
        std::map<std::string, double> sorted;
        for (const auto& [x, num] : numerators_) {
            sorted[sequence_string(x)] = static_cast<double>(num) / static_cast<double>(denominator_);
        }
        char buf[32];
        for (const auto& [k, v] : sorted) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            os << k << '\t' << buf << '\n';
        }
    }

private:
    OracleConfig cfg_;
    std::uint64_t denominator_ = 1;
    std::map<Sequence, std::uint64_t> numerators_;
};

namespace detail {

// Depth-first walk of the program trie. The machine is copied only at
// branch points (the frontier), so each distinct evaluated prefix runs once.
inline void enumerate_from(Machine m, std::uint32_t L, std::map<Sequence, std::uint64_t>& terminal) {
    const StepOutcome o = m.run_until_frontier();
    if (o == StepOutcome::BudgetExhausted || m.program_len_exhausted()) {
        terminal[m.output()] += pow7(L - static_cast<std::uint32_t>(m.program().size()));
        return;
    }
    for (std::size_t i = 0; i < kSampledOps.size(); ++i) {
        if (i + 1 == kSampledOps.size()) {
            m.append(kSampledOps[i]);
            enumerate_from(std::move(m), L, terminal);
        } else {
            Machine child = m;
            child.append(kSampledOps[i]);
            enumerate_from(std::move(child), L, terminal);
        }
    }
}

}  // namespace detail

inline PriorTable enumerate_prior(const OracleConfig& cfg, unsigned workers = 7) {
    if (cfg.max_program_len > cfg.guard) {
        throw std::invalid_argument("enumerate_prior: L=" + std::to_string(cfg.max_program_len) +
                                    " exceeds the enumeration guard " + std::to_string(cfg.guard));
    }
    if (cfg.max_program_len > 22) throw std::invalid_argument("enumerate_prior: 7^L overflows 64 bits");
    const std::uint32_t L = cfg.max_program_len;

    // Terminal runs: output -> summed numerator. Root-level branches split
    // across workers and merge additively.
    std::map<Sequence, std::uint64_t> terminal;
    Machine root(cfg.limits());
    const StepOutcome o = root.run_until_frontier();
    if (o == StepOutcome::BudgetExhausted || root.program_len_exhausted()) {
        terminal[root.output()] += pow7(L);
    } else {
        std::vector<std::map<Sequence, std::uint64_t>> parts(kSampledOps.size());
        std::vector<std::future<void>> jobs;
        auto branch = [&](std::size_t i) {
            Machine child = root;
            child.append(kSampledOps[i]);
            detail::enumerate_from(std::move(child), L, parts[i]);
        };
        if (workers <= 1) {
            for (std::size_t i = 0; i < parts.size(); ++i) branch(i);
        } else {
            for (std::size_t i = 0; i < parts.size(); ++i) jobs.push_back(std::async(std::launch::async, branch, i));
            for (auto& j : jobs) j.get();
        }
        for (const auto& part : parts) {
            for (const auto& [y, w] : part) terminal[y] += w;
        }
    }

    std::map<Sequence, std::uint64_t> table;
    for (const auto& [y, w] : terminal) {
        for (std::size_t k = 0; k <= y.size(); ++k) table[Sequence(y.begin(), y.begin() + k)] += w;
    }
    return PriorTable(cfg, std::move(table));
}

}  // namespace solgen
