#pragma once

// Program distributions Q over the 7 sampled BrainPhoque instructions,
// program shortening, and the log(7)-per-instruction upper bound.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "solgen/bp_machine.hpp"
#include "solgen/rng.hpp"

namespace solgen {

inline constexpr char kContextPad = '_';

// k-order Markov distribution over the sampled instructions. Contexts are the
// last k generated cells ('{' merged into '['), left-padded with '_'.
class ProgramDistribution {
public:
    using Row = std::array<double, kNumSampledOps>;

    explicit ProgramDistribution(int order = 0) : order_(order) {
        if (order < 0 || order > 6) throw std::invalid_argument("ProgramDistribution: order must be in [0, 6]");
        std::size_t n = 1;
        for (int i = 0; i < order; ++i) n *= kContextSymbols;
        Row uniform;
        uniform.fill(1.0 / kNumSampledOps);
        rows_.assign(n, uniform);
    }

    static ProgramDistribution uniform(int order = 0) { return ProgramDistribution(order); }

    int order() const noexcept { return order_; }
    std::size_t num_rows() const noexcept { return rows_.size(); }
    const Row& row(std::size_t index) const { return rows_.at(index); }
    Row& row(std::size_t index) { return rows_.at(index); }
    const std::vector<Row>& rows() const noexcept { return rows_; }

    // Context code: base-8 digits, oldest first, 7 = padding.
    std::size_t context_index(std::span<const Op> history) const noexcept {
        std::size_t idx = 0;
        const auto n = static_cast<std::ptrdiff_t>(history.size());
        for (int j = order_; j >= 1; --j) {
            const std::ptrdiff_t pos = n - j;
            const std::size_t sym = pos < 0 ? kPadCode : static_cast<std::size_t>(sampled_index(history[pos]));
            idx = idx * kContextSymbols + sym;
        }
        return idx;
    }

    // Parses a context string such as "__", "_+", "[." (length == order).
    std::size_t context_index(std::string_view context) const {
        if (static_cast<int>(context.size()) != order_) {
            throw std::invalid_argument("context length does not match the distribution order");
        }
        std::size_t idx = 0;
        for (char c : context) {
            std::size_t sym = kPadCode;
            if (c != kContextPad) {
                auto op = op_from_char(c);
                if (!op) throw std::invalid_argument(std::string("bad context symbol '") + c + "'");
                sym = static_cast<std::size_t>(sampled_index(*op));
            }
            idx = idx * kContextSymbols + sym;
        }
        return idx;
    }

    std::string context_string(std::size_t index) const {
        std::string s(static_cast<std::size_t>(order_), kContextPad);
        for (int j = order_ - 1; j >= 0; --j) {
            const std::size_t sym = index % kContextSymbols;
            index /= kContextSymbols;
            s[static_cast<std::size_t>(j)] = sym == kPadCode ? kContextPad : to_char(kSampledOps[sym]);
        }
        return s;
    }

    // Padding may only precede real symbols.
    bool reachable(std::size_t index) const {
        const std::string ctx = context_string(index);
        bool seen_real = false;
        for (char c : ctx) {
            if (c != kContextPad) seen_real = true;
            else if (seen_real) return false;
        }
        return true;
    }

    Op sample(std::span<const Op> history, Rng& rng) const {
        const Row& r = rows_[context_index(history)];
        return kSampledOps[categorical(rng, r)];
    }

    double probability(std::span<const Op> history, Op op) const {
        return rows_[context_index(history)][static_cast<std::size_t>(sampled_index(op))];
    }

    // Q(q) of a whole stream.
    double log_probability(std::span<const Op> stream) const {
        double lp = 0.0;
        for (std::size_t i = 0; i < stream.size(); ++i) {
            lp += std::log(probability(stream.first(i), stream[i]));
        }
        return lp;
    }

    // One line per reachable context: "<context>\t<p<> p> p+ p- p[ p] p.>".
    void write(std::ostream& os) const {
        os << "# solgen Q table order " << order_ << " columns <>+-[].\n";
        char buf[32];
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            if (!reachable(i)) continue;
            os << context_string(i);
            for (std::size_t c = 0; c < kNumSampledOps; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", rows_[i][c]);
                os << (c == 0 ? '\t' : ' ') << buf;
            }
            os << '\n';
        }
    }

    static ProgramDistribution read(std::istream& is) {
        std::string line;
        if (!std::getline(is, line)) throw std::runtime_error("Q table: empty input");
        const std::string tag = "order ";
        const auto at = line.find(tag);
        if (line.rfind("#", 0) != 0 || at == std::string::npos) throw std::runtime_error("Q table: missing header");
        ProgramDistribution d(std::stoi(line.substr(at + tag.size())));
        std::vector<bool> seen(d.rows_.size(), false);
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw std::runtime_error("Q table: missing tab in '" + line + "'");
            const std::size_t idx = d.context_index(std::string_view(line).substr(0, tab));
            std::istringstream vals(line.substr(tab + 1));
            for (auto& p : d.rows_[idx]) {
                if (!(vals >> p)) throw std::runtime_error("Q table: short row for context '" + line.substr(0, tab) + "'");
            }
            seen[idx] = true;
        }
        for (std::size_t i = 0; i < seen.size(); ++i) {
            if (d.reachable(i) && !seen[i]) {
                throw std::runtime_error("Q table: missing row for context '" + d.context_string(i) + "'");
            }
        }
        return d;
    }

    static ProgramDistribution load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open Q table '" + path + "'");
        return read(in);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write Q table '" + path + "'");
        write(out);
    }

    static constexpr std::size_t kContextSymbols = 8;
    static constexpr std::size_t kPadCode = 7;

private:
    int order_;
    std::vector<Row> rows_;
};

inline Op sample_instruction(const ProgramDistribution& dist, std::span<const Op> history, Rng& rng) {
    return dist.sample(history, rng);
}

// --- universality preconditions --------------------------------------------

struct UniversalityReport {
    bool ok = true;
    std::string failed_condition;  // "positivity" | "normalization" | "vanishing"
    std::string context;
    std::size_t row = 0;
};

// Positive rows that sum to one with every entry < 1 make Q a computable
// measure with Q(q) > 0 and Q(q_{1:n}) <= (max entry)^n -> 0.
inline UniversalityReport check_universality_conditions(const ProgramDistribution& dist) {
    UniversalityReport rep;
    for (std::size_t i = 0; i < dist.num_rows(); ++i) {
        const auto& r = dist.row(i);
        double sum = 0.0;
        double max_entry = 0.0;
        bool positive = true;
        for (double p : r) {
            if (!(p > 0.0)) positive = false;
            sum += p;
            max_entry = std::max(max_entry, p);
        }
        const char* failure = nullptr;
        if (!positive) failure = "positivity";
        else if (std::abs(sum - 1.0) > 1e-12) failure = "normalization";
        else if (!(max_entry < 1.0)) failure = "vanishing";
        if (failure) {
            rep.ok = false;
            rep.failed_condition = failure;
            rep.row = i;
            rep.context = dist.context_string(i);
            return rep;
        }
    }
    return rep;
}

// --- fitting -------------------------------------------------------------

// Maximum-likelihood k-order transition counts plus additive smoothing.
inline ProgramDistribution fit_markov_q(const std::vector<std::vector<Op>>& corpus, int order, double smoothing) {
    if (!(smoothing > 0.0)) throw std::invalid_argument("fit_markov_q: smoothing must be > 0 to keep Q positive");
    ProgramDistribution d(order);
    std::vector<std::array<double, kNumSampledOps>> counts(d.num_rows());
    for (auto& c : counts) c.fill(0.0);
    for (const auto& prog : corpus) {
        std::span<const Op> s(prog);
        for (std::size_t i = 0; i < s.size(); ++i) {
            counts[d.context_index(s.first(i))][static_cast<std::size_t>(sampled_index(s[i]))] += 1.0;
        }
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double total = 0.0;
        for (double c : counts[i]) total += c + smoothing;
        for (std::size_t c = 0; c < kNumSampledOps; ++c) d.row(i)[c] = (counts[i][c] + smoothing) / total;
    }
    return d;
}

// --- interestingness filter ----------------------------------------------

struct InterestFilter {
    std::size_t min_len = 256;
    std::size_t max_period = 128;
    double min_tail_fraction = 0.5;
};

// Boring: shorter than min_len, or ending in a p-periodic tail (p <=
// max_period) that repeats at least twice and covers at least
// min_tail_fraction of the output.
inline bool is_interesting(std::span<const std::uint8_t> out, InterestFilter f = {}) {
    const std::size_t n = out.size();
    if (n < f.min_len || n == 0) return false;
    for (std::size_t p = 1; p <= f.max_period && 2 * p <= n; ++p) {
        // Smallest r such that out[i] == out[i + p] for all i >= r.
        std::size_t r = 0;
        for (std::size_t i = n - p; i-- > 0;) {
            if (out[i] != out[i + p]) {
                r = i + 1;
                break;
            }
        }
        const std::size_t tail = n - r;
        if (tail >= 2 * p && static_cast<double>(tail) >= f.min_tail_fraction * static_cast<double>(n)) return false;
    }
    return true;
}

// --- shortening ----------------------------------------------------------

struct ShortenedProgram {
    Program program;  // regenerated from the shortened stream
    std::uint32_t original_len = 0;
    std::uint32_t shortened_len = 0;

    std::string text() const { return program.text(); }
};

namespace detail {

inline bool starts_with(std::span<const std::uint8_t> haystack, std::span<const std::uint8_t> prefix) {
    return haystack.size() >= prefix.size() && std::equal(prefix.begin(), prefix.end(), haystack.begin());
}

// (a) keep only cells generated no later than the last print.
inline std::vector<Op> drop_after_last_print(const RunResult& run) {
    if (!run.trace.last_print_step) return {};
    const std::uint32_t last = *run.trace.last_print_step;
    std::size_t keep = 0;
    for (std::size_t i = 0; i < run.program.size(); ++i) {
        const auto first = run.trace.first_eval_step[i];
        if (first != Machine::kUnvisited && first <= last) keep = i + 1;
    }
    auto s = run.program.stream();
    s.resize(keep);
    return s;
}

// (b) skipped ']', '[' that no ']' ever matched, '{' whose body never ran.
inline std::vector<std::size_t> inert_brackets(const RunResult& run) {
    const Program& p = run.program;
    std::vector<bool> matched(p.size(), false);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.cells[i] == Op::Close && p.jump[i] >= 0) matched[static_cast<std::size_t>(p.jump[i])] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const Op op = p.cells[i];
        const bool body_generated = p.jump[i] >= 0 && static_cast<std::size_t>(p.jump[i]) < p.size();
        if ((op == Op::Close && p.jump[i] < 0) || (op == Op::Open && !matched[i]) ||
            (op == Op::OpenSkipped && !body_generated)) {
            out.push_back(i);
        }
    }
    return out;
}

inline std::vector<Op> erase_indices(std::span<const Op> s, const std::vector<std::size_t>& idx) {
    std::vector<Op> out;
    out.reserve(s.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (k < idx.size() && idx[k] == i) {
            ++k;
            continue;
        }
        out.push_back(s[i]);
    }
    return out;
}

constexpr bool cancels(Op a, Op b) noexcept {
    return (a == Op::Inc && b == Op::Dec) || (a == Op::Dec && b == Op::Inc) ||
           (a == Op::Left && b == Op::Right) || (a == Op::Right && b == Op::Left);
}

// (c) adjacent self-cancelling pairs, reduced recursively.
inline std::vector<Op> cancel_pairs(std::span<const Op> s) {
    std::vector<Op> out;
    out.reserve(s.size());
    for (Op op : s) {
        if (!out.empty() && cancels(out.back(), op)) out.pop_back();
        else out.push_back(op);
    }
    return out;
}

}  // namespace detail

// Applies the three reductions to a fixed point. A candidate is accepted only
// if re-running it under `limits` yields an output that starts with the
// original output.
inline ShortenedProgram shorten(const Program& program, const RunLimits& limits) {
    const std::vector<Op> original = program.stream();
    const RunResult reference = run_stream(original, limits);
    const std::vector<std::uint8_t>& target = reference.output;

    auto preserves = [&](const std::vector<Op>& cand, RunResult* keep) {
        RunResult r = run_stream(cand, limits);
        const bool ok = detail::starts_with(r.output, target);
        if (ok && keep) *keep = std::move(r);
        return ok;
    };

    std::vector<Op> cur = original;
    RunResult run = reference;
    for (;;) {
        const auto a = detail::drop_after_last_print(run);
        const auto b = detail::erase_indices(run.program.stream(), detail::inert_brackets(run));
        const auto c = detail::cancel_pairs(cur);

        // All rules together first, then each on its own.
        const std::vector<Op> all = [&] {
            const RunResult ra = run_stream(a, limits);
            return detail::cancel_pairs(detail::erase_indices(ra.program.stream(), detail::inert_brackets(ra)));
        }();

        bool changed = false;
        for (const auto* cand : {&all, &a, &b, &c}) {
            if (cand->size() < cur.size() && preserves(*cand, &run)) {
                cur = run.program.stream();  // drops any tail the run never reached
                changed = true;
                break;
            }
        }
        if (!changed) break;
    }

    ShortenedProgram sp;
    sp.program = run.program;
    sp.original_len = static_cast<std::uint32_t>(original.size());
    sp.shortened_len = static_cast<std::uint32_t>(cur.size());
    return sp;
}

// The trace argument is accepted for interface parity; the run is recomputed
// from the program so both always agree.
inline ShortenedProgram shorten(const Program& program, const EvalTrace& /*trace*/, const RunLimits& limits) {
    return shorten(program, limits);
}

inline ShortenedProgram shorten(std::string_view stream_text, const RunLimits& limits) {
    return shorten(run_stream(stream_text, limits).program, limits);
}

// log(7) * sum of shortened lengths, in nats.
inline double solomonoff_upper_bound(std::span<const std::uint32_t> shortened_lengths) {
    std::uint64_t total = 0;
    for (auto l : shortened_lengths) total += l;
    return std::log(7.0) * static_cast<double>(total);
}

}  // namespace solgen
