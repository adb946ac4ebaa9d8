#pragma once

// BrainPhoque: a BF-derived monotone machine with a 200-cell working tape over
// a 17-value alphabet, no input tape, and programs that may be generated while
// they are being evaluated.

#include <array>
#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "solgen/rng.hpp"

namespace solgen {

inline constexpr int kAlphabetSize = 17;
inline constexpr int kTapeLength = 200;
inline constexpr int kNumSampledOps = 7;

enum class Op : std::uint8_t {
    Left,         // '<'
    Right,        // '>'
    Inc,          // '+'
    Dec,          // '-'
    Open,         // '['
    Close,        // ']'
    Print,        // '.'
    OpenSkipped,  // '{' : an Open first reached with datum 0; never sampled
};

// Column order of the sampled alphabet: "<>+-[]."
inline constexpr std::array<Op, kNumSampledOps> kSampledOps = {
    Op::Left, Op::Right, Op::Inc, Op::Dec, Op::Open, Op::Close, Op::Print};

constexpr char to_char(Op op) noexcept {
    constexpr std::string_view chars = "<>+-[].{";
    return chars[static_cast<std::size_t>(op)];
}

constexpr std::optional<Op> op_from_char(char c) noexcept {
    switch (c) {
        case '<': return Op::Left;
        case '>': return Op::Right;
        case '+': return Op::Inc;
        case '-': return Op::Dec;
        case '[': return Op::Open;
        case ']': return Op::Close;
        case '.': return Op::Print;
        case '{': return Op::OpenSkipped;
        default: return std::nullopt;
    }
}

// '{' is a rewritten '[' and shares its sampled symbol.
constexpr Op sampled_symbol(Op op) noexcept {
    return op == Op::OpenSkipped ? Op::Open : op;
}

constexpr int sampled_index(Op op) noexcept {
    return static_cast<int>(sampled_symbol(op));
}

constexpr bool is_bracket(Op op) noexcept {
    return op == Op::Open || op == Op::Close || op == Op::OpenSkipped;
}

inline std::vector<Op> parse_ops(std::string_view text, bool allow_skipped = false) {
    std::vector<Op> ops;
    ops.reserve(text.size());
    for (char c : text) {
        auto op = op_from_char(c);
        if (!op || (*op == Op::OpenSkipped && !allow_skipped)) {
            throw std::invalid_argument(std::string("invalid BrainPhoque instruction '") + c + "'");
        }
        ops.push_back(*op);
    }
    return ops;
}

inline std::string ops_to_string(std::span<const Op> ops) {
    std::string s;
    s.reserve(ops.size());
    for (Op op : ops) s.push_back(to_char(op));
    return s;
}

struct RunLimits {
    std::uint32_t max_steps = 1000;
    std::uint32_t max_output = 256;
    std::optional<std::uint32_t> max_program_len;  // unbounded when empty
};

inline constexpr std::int32_t kNoJump = -1;

// Instruction array plus jump table.
//  '['  jump = continuation start (set lazily in generation mode)
//  '{'  jump = body start (set lazily)
//  ']'  jump = matching open, kNoJump when skipped
// A jump equal to cells.size() points at the generation frontier / program end.
struct Program {
    std::vector<Op> cells;
    std::vector<std::int32_t> jump;
    std::vector<std::int32_t> open_stack;

    std::size_t size() const noexcept { return cells.size(); }
    std::string text() const { return ops_to_string(cells); }

    // Sampling-order symbols, '{' written as '['.
    std::vector<Op> stream() const {
        std::vector<Op> s(cells);
        for (auto& op : s) op = sampled_symbol(op);
        return s;
    }

    friend bool operator==(const Program&, const Program&) = default;
};

struct BracketMatch {
    std::vector<std::int32_t> jump;  // same length as the program
    std::vector<std::size_t> skipped_closes;
    std::vector<std::size_t> unmatched_opens;
};

// Static most-nested-first matching of a fixed BF text. A matched '[' jumps
// past its ']' on datum 0; an unmatched '[' jumps to one past the end.
inline BracketMatch match_brackets(std::span<const Op> text) {
    BracketMatch m;
    m.jump.assign(text.size(), kNoJump);
    std::vector<std::size_t> stack;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == Op::OpenSkipped) {
            throw std::invalid_argument("match_brackets: '{' only occurs in generated programs");
        }
        if (text[i] == Op::Open) {
            stack.push_back(i);
        } else if (text[i] == Op::Close) {
            if (stack.empty()) {
                m.skipped_closes.push_back(i);
            } else {
                const std::size_t o = stack.back();
                stack.pop_back();
                m.jump[i] = static_cast<std::int32_t>(o);
                m.jump[o] = static_cast<std::int32_t>(i + 1);
            }
        }
    }
    for (std::size_t o : stack) {
        m.jump[o] = static_cast<std::int32_t>(text.size());
        m.unmatched_opens.push_back(o);
    }
    return m;
}

inline Program fixed_program(std::span<const Op> text) {
    Program p;
    p.cells.assign(text.begin(), text.end());
    p.jump = match_brackets(text).jump;
    return p;
}

struct MachineState {
    std::array<std::uint8_t, kTapeLength> tape{};
    std::uint16_t wtp = 0;
    std::uint32_t ip = 0;
    std::uint32_t steps = 0;
    std::vector<std::uint8_t> output;

    std::uint8_t datum() const noexcept { return tape[wtp]; }
};

struct EvalTrace {
    std::vector<std::uint32_t> first_eval_step;  // per cell
    std::optional<std::uint32_t> last_print_step;
    std::uint32_t consumed_len = 0;
};

enum class StepOutcome { Continued, OutputEmitted, BudgetExhausted, NeedsInstruction };

class Machine {
public:
    explicit Machine(RunLimits limits) : limits_(limits) {}
    Machine(Program program, RunLimits limits) : program_(std::move(program)), limits_(limits) {
        trace_.consumed_len = static_cast<std::uint32_t>(program_.size());
        trace_.first_eval_step.assign(program_.size(), kUnvisited);
    }

    static constexpr std::uint32_t kUnvisited = UINT32_MAX;

    const MachineState& state() const noexcept { return state_; }
    const Program& program() const noexcept { return program_; }
    const EvalTrace& trace() const noexcept { return trace_; }
    const RunLimits& limits() const noexcept { return limits_; }
    const std::vector<std::uint8_t>& output() const noexcept { return state_.output; }

    bool budget_exhausted() const noexcept {
        return state_.steps >= limits_.max_steps || state_.output.size() >= limits_.max_output;
    }

    bool at_frontier() const noexcept { return state_.ip >= program_.size(); }

    bool program_len_exhausted() const noexcept {
        return limits_.max_program_len && program_.size() >= *limits_.max_program_len;
    }

    // Evaluates at most one instruction.
    StepOutcome step() {
        if (budget_exhausted()) return StepOutcome::BudgetExhausted;
        if (at_frontier()) return StepOutcome::NeedsInstruction;

        const std::uint32_t ip = state_.ip;
        auto& datum = state_.tape[state_.wtp];
        if (trace_.first_eval_step[ip] == kUnvisited) trace_.first_eval_step[ip] = state_.steps;
        StepOutcome outcome = StepOutcome::Continued;

        switch (program_.cells[ip]) {
            case Op::Left:
                state_.wtp = static_cast<std::uint16_t>((state_.wtp + kTapeLength - 1) % kTapeLength);
                ++state_.ip;
                break;
            case Op::Right:
                state_.wtp = static_cast<std::uint16_t>((state_.wtp + 1) % kTapeLength);
                ++state_.ip;
                break;
            case Op::Inc:
                datum = static_cast<std::uint8_t>((datum + 1) % kAlphabetSize);
                ++state_.ip;
                break;
            case Op::Dec:
                datum = static_cast<std::uint8_t>((datum + kAlphabetSize - 1) % kAlphabetSize);
                ++state_.ip;
                break;
            case Op::Open:
                state_.ip = datum != 0 ? ip + 1 : branch_target(ip, false);
                break;
            case Op::OpenSkipped:
                state_.ip = datum == 0 ? ip + 1 : branch_target(ip, true);
                break;
            case Op::Close:
                state_.ip = program_.jump[ip] >= 0 ? static_cast<std::uint32_t>(program_.jump[ip]) : ip + 1;
                break;
            case Op::Print:
                state_.output.push_back(datum);
                trace_.last_print_step = state_.steps;
                ++state_.ip;
                outcome = StepOutcome::OutputEmitted;
                break;
        }
        ++state_.steps;
        return outcome;
    }

    // Appends a freshly drawn instruction at the frontier. Only valid when
    // at_frontier(); the instruction is evaluated by the next step().
    void append(Op drawn) {
        if (!at_frontier()) throw std::logic_error("append: instruction pointer is not at the frontier");
        const auto index = static_cast<std::int32_t>(program_.size());
        Op op = sampled_symbol(drawn);
        std::int32_t jump = kNoJump;
        if (op == Op::Open) {
            if (state_.datum() == 0) {
                op = Op::OpenSkipped;  // continuation comes next
            } else {
                program_.open_stack.push_back(index);  // body comes next
            }
        } else if (op == Op::Close && !program_.open_stack.empty()) {
            jump = program_.open_stack.back();
            program_.open_stack.pop_back();
        }
        program_.cells.push_back(op);
        program_.jump.push_back(jump);
        trace_.first_eval_step.push_back(kUnvisited);
        trace_.consumed_len = static_cast<std::uint32_t>(program_.size());
        state_.ip = static_cast<std::uint32_t>(index);
    }

    // Runs until a budget binds or the frontier is reached.
    StepOutcome run_until_frontier() {
        for (;;) {
            const StepOutcome o = step();
            if (o == StepOutcome::BudgetExhausted || o == StepOutcome::NeedsInstruction) return o;
        }
    }

    // Drives generation: `next()` yields std::optional<Op>; nullopt ends the run.
    template <class NextInstruction>
    void run_generating(NextInstruction&& next) {
        while (run_until_frontier() == StepOutcome::NeedsInstruction) {
            if (program_len_exhausted()) return;
            std::optional<Op> op = next(std::span<const Op>(program_.cells));
            if (!op) return;
            append(*op);
        }
    }

private:
    // Target of the not-yet-taken branch of an open bracket; an unset branch
    // is placed at the frontier, a body additionally opens a pending match.
    std::uint32_t branch_target(std::uint32_t ip, bool body) {
        auto& target = program_.jump[ip];
        if (target < 0) {
            target = static_cast<std::int32_t>(program_.size());
            if (body) program_.open_stack.push_back(static_cast<std::int32_t>(ip));
        }
        return static_cast<std::uint32_t>(target);
    }

    Program program_;
    MachineState state_;
    EvalTrace trace_;
    RunLimits limits_;
};

struct RunResult {
    Program program;
    std::vector<std::uint8_t> output;
    EvalTrace trace;
    std::uint32_t steps = 0;
};

inline RunResult finish(Machine&& m) {
    RunResult r{m.program(), m.output(), m.trace(), m.state().steps};
    return r;
}

// Fixed-program mode over a BF text: static bracket matching, evaluation stops
// when the budgets bind or the instruction pointer leaves the program.
inline RunResult run_program(std::span<const Op> text, const RunLimits& limits) {
    Machine m(fixed_program(text), limits);
    m.run_until_frontier();
    return finish(std::move(m));
}

inline RunResult run_program(std::string_view text, const RunLimits& limits) {
    const auto ops = parse_ops(text);
    return run_program(std::span<const Op>(ops), limits);
}

// Generating mode fed by a fixed instruction stream: exactly the machine that
// sample_and_run drives, with the random draws replaced by `stream`.
// '{' in the stream is read as '['.
inline RunResult run_stream(std::span<const Op> stream, const RunLimits& limits) {
    Machine m(limits);
    std::size_t pos = 0;
    m.run_generating([&](std::span<const Op>) -> std::optional<Op> {
        if (pos >= stream.size()) return std::nullopt;
        return stream[pos++];
    });
    return finish(std::move(m));
}

inline RunResult run_stream(std::string_view text, const RunLimits& limits) {
    const auto ops = parse_ops(text, /*allow_skipped=*/true);
    return run_stream(std::span<const Op>(ops), limits);
}

// Replays an exported generated program (its cell text, '{' included).
// Throws if the text is not the output of a generating run.
inline RunResult replay_generated(std::string_view cells_text, const RunLimits& limits) {
    RunResult r = run_stream(cells_text, limits);
    if (r.program.text() != cells_text) {
        throw std::invalid_argument("replay_generated: text is not a generated program under these limits");
    }
    return r;
}

// Anything with `Op sample(std::span<const Op> history, Rng&) const`.
template <class D>
concept InstructionDistribution = requires(const D& d, std::span<const Op> h, Rng& rng) {
    { d.sample(h, rng) } -> std::same_as<Op>;
};

// Simultaneous sampling and evaluation: a new instruction is drawn from `dist`
// (conditioned on the generated history) whenever the frontier is reached.
template <InstructionDistribution D>
RunResult sample_and_run(const D& dist, const RunLimits& limits, Rng& rng) {
    Machine m(limits);
    m.run_generating([&](std::span<const Op> history) -> std::optional<Op> {
        return dist.sample(history, rng);
    });
    return finish(std::move(m));
}

}  // namespace solgen
