#pragma once

// The 15 algorithmic tasks on a shared 17-token vocabulary, their ground-truth
// oracles, uniform input generators, and episodic sequence assembly
// (x1 , y1 ; x2 , y2 ; ...) with output masks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "solgen/rng.hpp"

namespace solgen {

// --- vocabulary ----------------------------------------------------------

using Token = std::uint8_t;
using Tokens = std::vector<Token>;

namespace tok {
inline constexpr Token D0 = 0, D1 = 1, D2 = 2, D3 = 3, D4 = 4;
inline constexpr Token A = 5, B = 6;
inline constexpr Token Plus = 7, Minus = 8, Times = 9;
inline constexpr Token LParen = 10, RParen = 11;
inline constexpr Token X = 12;
inline constexpr Token True = 13, False = 14;
inline constexpr Token Pop = 15, Push = 16;
inline constexpr Token Comma = 17, Semicolon = 18;
}  // namespace tok

inline constexpr int kContentTokens = 17;
inline constexpr int kVocabSize = 19;
inline constexpr int kTokenTableVersion = 1;

class TokenVocab {
public:
    static constexpr std::array<std::string_view, kVocabSize> kSurface = {
        "0", "1", "2", "3", "4", "a", "b", "+", "-", "*", "(", ")", "x", "True", "False", "POP", "PUSH", ",", ";"};

    static std::string_view surface(Token t) {
        if (t >= kVocabSize) throw std::out_of_range("TokenVocab: id " + std::to_string(t));
        return kSurface[t];
    }

    static std::optional<Token> lookup(std::string_view s) {
        for (std::size_t i = 0; i < kSurface.size(); ++i) {
            if (kSurface[i] == s) return static_cast<Token>(i);
        }
        return std::nullopt;
    }

    // Whitespace-separated or packed surface text; multi-letter words are
    // matched greedily. "abbaa POP PUSH a POP" and "10010+101" both work.
    static Tokens encode(std::string_view text) {
        Tokens out;
        std::size_t i = 0;
        while (i < text.size()) {
            if (text[i] == ' ') {
                ++i;
                continue;
            }
            std::optional<Token> best;
            std::size_t best_len = 0;
            for (std::size_t id = 0; id < kSurface.size(); ++id) {
                const auto s = kSurface[id];
                if (s.size() > best_len && text.substr(i, s.size()) == s) {
                    best = static_cast<Token>(id);
                    best_len = s.size();
                }
            }
            if (!best) throw std::invalid_argument("TokenVocab: unknown symbol at '" + std::string(text.substr(i)) + "'");
            out.push_back(*best);
            i += best_len;
        }
        return out;
    }

    // Single-character tokens are packed, words are space separated.
    static std::string decode(std::span<const Token> tokens) {
        std::string s;
        bool prev_word = false;
        for (Token t : tokens) {
            const auto w = surface(t);
            const bool word = w.size() > 1;
            if (!s.empty() && (word || prev_word)) s.push_back(' ');
            s.append(w);
            prev_word = word;
        }
        return s;
    }

    static void write_table(std::ostream& os) {
        os << "# solgen token table v" << kTokenTableVersion << "\n";
        for (std::size_t i = 0; i < kSurface.size(); ++i) os << i << '\t' << kSurface[i] << '\n';
    }
};

// --- task catalogue ------------------------------------------------------

enum class ChomskyLevel { Regular, DeterministicContextFree, ContextSensitive };

inline std::string_view level_name(ChomskyLevel l) {
    switch (l) {
        case ChomskyLevel::Regular: return "R";
        case ChomskyLevel::DeterministicContextFree: return "DCF";
        case ChomskyLevel::ContextSensitive: return "CS";
    }
    return "?";
}

enum class TaskId : std::uint8_t {
    EvenPairs,
    ModularArithmeticSimple,
    ParityCheck,
    CycleNavigation,
    StackManipulation,
    ReverseString,
    ModularArithmetic,
    SolveEquation,
    DuplicateString,
    MissingDuplicate,
    OddsFirst,
    BinaryAddition,
    BinaryMultiplication,
    ComputeSqrt,
    BucketSort,
};

inline constexpr int kNumTasks = 15;

struct TaskSpec {
    TaskId id;
    std::string_view key;   // CLI identifier
    std::string_view name;  // display name
    ChomskyLevel level;
    Tokens input_alphabet;
    Tokens output_alphabet;
};

inline const std::vector<TaskSpec>& all_tasks() {
    using namespace tok;
    using L = ChomskyLevel;
    static const std::vector<TaskSpec> tasks = {
        {TaskId::EvenPairs, "even_pairs", "Even Pairs", L::Regular, {A, B}, {True, False}},
        {TaskId::ModularArithmeticSimple, "modular_arithmetic_simple", "Modular Arithmetic (Simple)", L::Regular,
         {D0, D1, D2, D3, D4, Plus, Minus, Times}, {D0, D1, D2, D3, D4}},
        {TaskId::ParityCheck, "parity_check", "Parity Check", L::Regular, {A, B}, {True, False}},
        {TaskId::CycleNavigation, "cycle_navigation", "Cycle Navigation", L::Regular, {D0, D1, D2},
         {D0, D1, D2, D3, D4}},
        {TaskId::StackManipulation, "stack_manipulation", "Stack Manipulation", L::DeterministicContextFree,
         {A, B, Pop, Push}, {A, B}},
        {TaskId::ReverseString, "reverse_string", "Reverse String", L::DeterministicContextFree, {A, B}, {A, B}},
        {TaskId::ModularArithmetic, "modular_arithmetic", "Modular Arithmetic", L::DeterministicContextFree,
         {D0, D1, D2, D3, D4, Plus, Minus, Times, LParen, RParen}, {D0, D1, D2, D3, D4}},
        {TaskId::SolveEquation, "solve_equation", "Solve Equation", L::DeterministicContextFree,
         {D0, D1, D2, D3, D4, Plus, Minus, Times, LParen, RParen, X}, {D0, D1, D2, D3, D4}},
        {TaskId::DuplicateString, "duplicate_string", "Duplicate String", L::ContextSensitive, {A, B}, {A, B}},
        {TaskId::MissingDuplicate, "missing_duplicate", "Missing Duplicate", L::ContextSensitive, {D0, D1, D2},
         {D0, D1}},
        {TaskId::OddsFirst, "odds_first", "Odds First", L::ContextSensitive, {A, B}, {A, B}},
        {TaskId::BinaryAddition, "binary_addition", "Binary Addition", L::ContextSensitive, {D0, D1, Plus},
         {D0, D1}},
        {TaskId::BinaryMultiplication, "binary_multiplication", "Binary Multiplication", L::ContextSensitive,
         {D0, D1, Times}, {D0, D1}},
        {TaskId::ComputeSqrt, "compute_sqrt", "Compute Sqrt", L::ContextSensitive, {D0, D1}, {D0, D1}},
        {TaskId::BucketSort, "bucket_sort", "Bucket Sort", L::ContextSensitive, {D0, D1, D2, D3, D4},
         {D0, D1, D2, D3, D4}},
    };
    return tasks;
}

inline const TaskSpec& task_spec(TaskId id) { return all_tasks()[static_cast<std::size_t>(id)]; }

inline const TaskSpec& task_spec(std::string_view key) {
    for (const auto& t : all_tasks()) {
        if (t.key == key || t.name == key) return t;
    }
    throw std::invalid_argument("unknown task '" + std::string(key) + "'");
}

struct MalformedInput : std::invalid_argument {
    MalformedInput(const TaskSpec& task, const std::string& what)
        : std::invalid_argument(std::string(task.name) + ": malformed input (" + what + ")") {}
};

// --- helpers shared by oracles and generators ----------------------------

namespace detail {

inline bool in_alphabet(std::span<const Token> input, std::span<const Token> alphabet) {
    return std::all_of(input.begin(), input.end(),
                       [&](Token t) { return std::find(alphabet.begin(), alphabet.end(), t) != alphabet.end(); });
}

using BinNum = std::vector<std::uint8_t>;  // MSB first, values 0/1

inline BinNum trim(BinNum v) {
    auto nz = std::find(v.begin(), v.end(), 1);
    if (nz == v.end()) return {0};
    return BinNum(nz, v.end());
}

inline BinNum bin_add(const BinNum& x, const BinNum& y) {
    BinNum out;
    int carry = 0;
    for (std::size_t i = 0; i < std::max(x.size(), y.size()) || carry; ++i) {
        const int a = i < x.size() ? x[x.size() - 1 - i] : 0;
        const int b = i < y.size() ? y[y.size() - 1 - i] : 0;
        const int s = a + b + carry;
        out.push_back(static_cast<std::uint8_t>(s & 1));
        carry = s >> 1;
    }
    std::reverse(out.begin(), out.end());
    return trim(out);
}

inline BinNum bin_mul(const BinNum& x, const BinNum& y) {
    BinNum acc{0};
    BinNum shifted = x;
    for (std::size_t i = y.size(); i-- > 0;) {
        if (y[i]) acc = bin_add(acc, shifted);
        shifted.push_back(0);
    }
    return trim(acc);
}

inline BinNum to_bin(std::uint64_t v) {
    BinNum out;
    do {
        out.push_back(static_cast<std::uint8_t>(v & 1));
        v >>= 1;
    } while (v);
    std::reverse(out.begin(), out.end());
    return out;
}

inline std::uint64_t isqrt(std::uint64_t n) {
    std::uint64_t r = 0;
    for (std::uint64_t bit = std::uint64_t{1} << 62; bit; bit >>= 2) {
        if (n >= r + bit) {
            n -= r + bit;
            r = (r >> 1) + bit;
        } else {
            r >>= 1;
        }
    }
    return r;
}

inline int mod5(long long v) { return static_cast<int>(((v % 5) + 5) % 5); }

// Recursive-descent evaluator over the expression tokens, modulo 5.
//   E := T (('+'|'-') T)*    T := F ('*' F)*    F := digit | x | '(' E ')' | '-' F
// Parentheses, unary minus and x are each enabled per task.
class ModParser {
public:
    struct Features {
        bool parens_and_unary = false;
        bool variable = false;
    };

    ModParser(std::span<const Token> in, Features f, int x) : in_(in), f_(f), x_(x) {}

    std::optional<int> parse() {
        auto v = expr();
        if (!v || pos_ != in_.size()) return std::nullopt;
        return v;
    }

private:
    bool peek(Token t) const { return pos_ < in_.size() && in_[pos_] == t; }

    std::optional<int> expr() {
        auto v = term();
        while (v && (peek(tok::Plus) || peek(tok::Minus))) {
            const bool plus = in_[pos_++] == tok::Plus;
            auto r = term();
            if (!r) return std::nullopt;
            v = mod5(plus ? *v + *r : *v - *r);
        }
        return v;
    }

    std::optional<int> term() {
        auto v = factor();
        while (v && peek(tok::Times)) {
            ++pos_;
            auto r = factor();
            if (!r) return std::nullopt;
            v = mod5(*v * *r);
        }
        return v;
    }

    std::optional<int> factor() {
        if (pos_ >= in_.size()) return std::nullopt;
        const Token t = in_[pos_];
        if (t <= tok::D4) {
            ++pos_;
            return t;
        }
        if (t == tok::X && f_.variable) {
            ++pos_;
            return x_;
        }
        if (f_.parens_and_unary && t == tok::Minus) {
            ++pos_;
            auto v = factor();
            if (!v) return std::nullopt;
            return mod5(-*v);
        }
        if (f_.parens_and_unary && t == tok::LParen) {
            ++pos_;
            auto v = expr();
            if (!v || !peek(tok::RParen)) return std::nullopt;
            ++pos_;
            return v;
        }
        return std::nullopt;
    }

    std::span<const Token> in_;
    Features f_;
    int x_;
    std::size_t pos_ = 0;
};

inline std::optional<std::vector<int>> equation_solutions(std::span<const Token> in) {
    if (std::count(in.begin(), in.end(), tok::X) != 1) return std::nullopt;
    std::vector<int> sols;
    for (int x = 0; x < 5; ++x) {
        auto v = ModParser(in, {true, true}, x).parse();
        if (!v) return std::nullopt;
        if (*v == 0) sols.push_back(x);
    }
    return sols;
}

inline std::optional<BinNum> binary_operand(std::span<const Token> in) {
    if (in.empty()) return std::nullopt;
    BinNum v;
    for (Token t : in) {
        if (t != tok::D0 && t != tok::D1) return std::nullopt;
        v.push_back(t);
    }
    return v;
}

inline Tokens bin_tokens(const BinNum& v) { return Tokens(v.begin(), v.end()); }

}  // namespace detail

// --- oracles -------------------------------------------------------------

inline Tokens task_oracle(const TaskSpec& task, std::span<const Token> in) {
    using namespace tok;
    if (!detail::in_alphabet(in, task.input_alphabet)) throw MalformedInput(task, "symbol outside the input alphabet");
    auto need_nonempty = [&] {
        if (in.empty()) throw MalformedInput(task, "empty input");
    };
    auto boolean = [](bool v) { return Tokens{v ? True : False}; };

    switch (task.id) {
        case TaskId::EvenPairs:
            need_nonempty();
            return boolean(in.front() == in.back());
        case TaskId::ParityCheck:
            return boolean(std::count(in.begin(), in.end(), B) % 2 == 0);
        case TaskId::CycleNavigation: {
            int pos = 0;
            for (Token t : in) pos = detail::mod5(pos + (t == D1 ? 1 : t == D2 ? -1 : 0));
            return {static_cast<Token>(pos)};
        }
        case TaskId::ModularArithmeticSimple:
        case TaskId::ModularArithmetic: {
            const bool full = task.id == TaskId::ModularArithmetic;
            auto v = detail::ModParser(in, {full, false}, 0).parse();
            if (!v) throw MalformedInput(task, "not a well-formed expression");
            return {static_cast<Token>(*v)};
        }
        case TaskId::SolveEquation: {
            auto sols = detail::equation_solutions(in);
            if (!sols) throw MalformedInput(task, "not a well-formed expression with exactly one x");
            if (sols->size() != 1) {
                throw MalformedInput(task, std::to_string(sols->size()) + " solutions instead of exactly one");
            }
            return {static_cast<Token>(sols->front())};
        }
        case TaskId::StackManipulation: {
            std::size_t i = 0;
            Tokens stack;
            while (i < in.size() && (in[i] == A || in[i] == B)) stack.push_back(in[i++]);
            while (i < in.size()) {
                if (in[i] == Pop) {
                    if (!stack.empty()) stack.pop_back();
                    ++i;
                } else if (in[i] == Push && i + 1 < in.size() && (in[i + 1] == A || in[i + 1] == B)) {
                    stack.push_back(in[i + 1]);
                    i += 2;
                } else {
                    throw MalformedInput(task, "expected POP or PUSH <letter> at position " + std::to_string(i));
                }
            }
            return stack;
        }
        case TaskId::ReverseString:
            return Tokens(in.rbegin(), in.rend());
        case TaskId::DuplicateString: {
            Tokens out(in.begin(), in.end());
            out.insert(out.end(), in.begin(), in.end());
            return out;
        }
        case TaskId::MissingDuplicate: {
            if (in.empty() || in.size() % 2 != 0) throw MalformedInput(task, "odd length");
            if (std::count(in.begin(), in.end(), D2) != 1) throw MalformedInput(task, "needs exactly one placeholder 2");
            const std::size_t half = in.size() / 2;
            const auto hole = static_cast<std::size_t>(std::find(in.begin(), in.end(), D2) - in.begin());
            const std::size_t twin = hole < half ? hole + half : hole - half;
            for (std::size_t i = 0; i < half; ++i) {
                if (i == hole % half) continue;
                if (in[i] != in[i + half]) throw MalformedInput(task, "halves differ");
            }
            return {in[twin]};
        }
        case TaskId::OddsFirst: {
            Tokens out;
            for (std::size_t i = 0; i < in.size(); i += 2) out.push_back(in[i]);
            for (std::size_t i = 1; i < in.size(); i += 2) out.push_back(in[i]);
            return out;
        }
        case TaskId::BinaryAddition:
        case TaskId::BinaryMultiplication: {
            const Token op = task.id == TaskId::BinaryAddition ? Plus : Times;
            if (std::count(in.begin(), in.end(), op) != 1) throw MalformedInput(task, "needs exactly one operator");
            const auto split = static_cast<std::size_t>(std::find(in.begin(), in.end(), op) - in.begin());
            auto x = detail::binary_operand(in.first(split));
            auto y = detail::binary_operand(in.subspan(split + 1));
            if (!x || !y) throw MalformedInput(task, "operands must be non-empty binary numbers");
            return detail::bin_tokens(op == Plus ? detail::bin_add(*x, *y) : detail::bin_mul(*x, *y));
        }
        case TaskId::ComputeSqrt: {
            auto x = detail::binary_operand(in);
            if (!x) throw MalformedInput(task, "expected a non-empty binary number");
            const auto v = detail::trim(*x);
            if (v.size() > 63) throw MalformedInput(task, "number wider than 63 bits");
            std::uint64_t n = 0;
            for (auto b : v) n = (n << 1) | b;
            return detail::bin_tokens(detail::to_bin(detail::isqrt(n)));
        }
        case TaskId::BucketSort: {
            Tokens out(in.begin(), in.end());
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    throw std::logic_error("task_oracle: unhandled task");
}

inline Tokens task_oracle(TaskId id, std::span<const Token> in) { return task_oracle(task_spec(id), in); }

// --- uniform input generation --------------------------------------------

namespace detail {

// Counts of well-formed expression strings by length and number of x's,
// for the grammar in ModParser. Exact in 64 bits up to kMaxExprLen.
class ExprCounts {
public:
    ExprCounts(std::size_t max_len, bool full, bool variable)
        : full_(full), variable_(variable), e_(max_len + 1), t_(max_len + 1), f_(max_len + 1) {
        for (std::size_t n = 1; n <= max_len; ++n) {
            for (int x = 0; x < 2; ++x) {
                std::uint64_t f = 0;
                if (n == 1) f += x == 0 ? 5 : (variable_ ? 1 : 0);
                if (full_ && n >= 2) f += f_[n - 1][x];
                if (full_ && n >= 3) f += e_[n - 2][x];
                f_[n][x] = f;
            }
            for (int x = 0; x < 2; ++x) {
                std::uint64_t t = f_[n][x];
                for (std::size_t k = 1; k + 1 < n; ++k) {
                    for (int x1 = 0; x1 <= x; ++x1) t += t_[k][x1] * f_[n - 1 - k][x - x1];
                }
                t_[n][x] = t;
            }
            for (int x = 0; x < 2; ++x) {
                std::uint64_t e = t_[n][x];
                for (std::size_t k = 1; k + 1 < n; ++k) {
                    for (int x1 = 0; x1 <= x; ++x1) e += 2 * e_[k][x1] * t_[n - 1 - k][x - x1];
                }
                e_[n][x] = e;
            }
        }
    }

    std::uint64_t expressions(std::size_t n, int x) const { return n < e_.size() ? e_[n][x] : 0; }

    void sample_e(std::size_t n, int x, Rng& rng, Tokens& out) const {
        std::uint64_t r = uniform_below(rng, e_[n][x]);
        if (r < t_[n][x]) return sample_t(n, x, rng, out);
        r -= t_[n][x];
        for (std::size_t k = 1; k + 1 < n; ++k) {
            for (int x1 = 0; x1 <= x; ++x1) {
                const std::uint64_t c = e_[k][x1] * t_[n - 1 - k][x - x1];
                for (Token op : {tok::Plus, tok::Minus}) {
                    if (r < c) {
                        sample_e(k, x1, rng, out);
                        out.push_back(op);
                        return sample_t(n - 1 - k, x - x1, rng, out);
                    }
                    r -= c;
                }
            }
        }
        throw std::logic_error("ExprCounts: sampling ran past the count");
    }

private:
    void sample_t(std::size_t n, int x, Rng& rng, Tokens& out) const {
        std::uint64_t r = uniform_below(rng, t_[n][x]);
        if (r < f_[n][x]) return sample_f(n, x, rng, out);
        r -= f_[n][x];
        for (std::size_t k = 1; k + 1 < n; ++k) {
            for (int x1 = 0; x1 <= x; ++x1) {
                const std::uint64_t c = t_[k][x1] * f_[n - 1 - k][x - x1];
                if (r < c) {
                    sample_t(k, x1, rng, out);
                    out.push_back(tok::Times);
                    return sample_f(n - 1 - k, x - x1, rng, out);
                }
                r -= c;
            }
        }
        throw std::logic_error("ExprCounts: sampling ran past the count");
    }

    void sample_f(std::size_t n, int x, Rng& rng, Tokens& out) const {
        std::uint64_t r = uniform_below(rng, f_[n][x]);
        if (n == 1) {
            out.push_back(x == 1 ? tok::X : static_cast<Token>(r));
            return;
        }
        if (r < f_[n - 1][x]) {
            out.push_back(tok::Minus);
            return sample_f(n - 1, x, rng, out);
        }
        out.push_back(tok::LParen);
        sample_e(n - 2, x, rng, out);
        out.push_back(tok::RParen);
    }

    bool full_, variable_;
    std::vector<std::array<std::uint64_t, 2>> e_, t_, f_;
};

inline constexpr std::size_t kMaxExprLen = 24;

inline const ExprCounts& expr_counts(TaskId id) {
    static const ExprCounts simple(kMaxExprLen, false, false);
    static const ExprCounts full(kMaxExprLen, true, false);
    static const ExprCounts equation(kMaxExprLen, true, true);
    switch (id) {
        case TaskId::ModularArithmeticSimple: return simple;
        case TaskId::ModularArithmetic: return full;
        default: return equation;
    }
}

// Stack inputs: letters, then a sequence of POP | PUSH letter.
inline std::uint64_t stack_op_strings(std::size_t m) {
    std::uint64_t prev = 1, cur = 1;  // m = 0, 1
    if (m == 0) return 1;
    for (std::size_t i = 2; i <= m; ++i) {
        const std::uint64_t next = cur + 2 * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

inline std::uint64_t binary_numbers(std::size_t len) {
    if (len == 0) return 0;
    return len == 1 ? 2 : std::uint64_t{1} << (len - 1);
}

// MSB-first, no leading zero unless the number is 0.
inline void sample_binary(std::size_t len, Rng& rng, Tokens& out) {
    if (len == 1) {
        out.push_back(static_cast<Token>(uniform_below(rng, 2)));
        return;
    }
    out.push_back(tok::D1);
    for (std::size_t i = 1; i < len; ++i) out.push_back(static_cast<Token>(uniform_below(rng, 2)));
}

}  // namespace detail

inline constexpr std::size_t kMaxTaskInputLen = 64;

inline bool valid_input_length(TaskId id, std::size_t n) {
    if (n == 0 || n > kMaxTaskInputLen) return false;
    switch (id) {
        case TaskId::ModularArithmeticSimple:
        case TaskId::ModularArithmetic:
            return detail::expr_counts(id).expressions(n, 0) > 0;
        case TaskId::SolveEquation:
            return detail::expr_counts(id).expressions(n, 1) > 0;
        case TaskId::MissingDuplicate:
            return n % 2 == 0;
        case TaskId::BinaryAddition:
        case TaskId::BinaryMultiplication:
            return n >= 3;
        default:
            return true;
    }
}

struct Episode {
    Tokens input;
    Tokens output;
};

// Input drawn uniformly over well-formed inputs of length n. For Solve
// Equation the uniform draw is over expressions with one x, rejected until
// the solution is unique.
inline Episode generate_episode(const TaskSpec& task, std::size_t n, Rng& rng) {
    using namespace tok;
    if (!valid_input_length(task.id, n)) {
        throw std::invalid_argument(std::string(task.name) + ": no well-formed input of length " + std::to_string(n));
    }
    Tokens in;
    auto letters = [&](std::span<const Token> alphabet, std::size_t len) {
        for (std::size_t i = 0; i < len; ++i) in.push_back(alphabet[uniform_below(rng, alphabet.size())]);
    };
    switch (task.id) {
        case TaskId::EvenPairs:
        case TaskId::ParityCheck:
        case TaskId::CycleNavigation:
        case TaskId::ReverseString:
        case TaskId::DuplicateString:
        case TaskId::OddsFirst:
        case TaskId::BucketSort:
            letters(task.input_alphabet, n);
            break;
        case TaskId::ModularArithmeticSimple:
        case TaskId::ModularArithmetic:
            detail::expr_counts(task.id).sample_e(n, 0, rng, in);
            break;
        case TaskId::SolveEquation:
            for (int attempt = 0;; ++attempt) {
                if (attempt == 100000) throw std::runtime_error("Solve Equation: rejection sampling did not converge");
                in.clear();
                detail::expr_counts(task.id).sample_e(n, 1, rng, in);
                auto sols = detail::equation_solutions(in);
                if (sols && sols->size() == 1) break;
            }
            break;
        case TaskId::StackManipulation: {
            std::vector<double> w(n + 1);
            for (std::size_t k = 0; k <= n; ++k) {
                w[k] = static_cast<double>(std::uint64_t{1} << k) * static_cast<double>(detail::stack_op_strings(n - k));
            }
            const std::size_t k = categorical(rng, w);
            const Token ab[] = {A, B};
            letters(ab, k);
            std::size_t m = n - k;
            while (m > 0) {
                // POP leaves m-1, PUSH x leaves m-2 (two letter choices).
                const double pop = static_cast<double>(detail::stack_op_strings(m - 1));
                const double push = m >= 2 ? 2.0 * static_cast<double>(detail::stack_op_strings(m - 2)) : 0.0;
                const double choice[] = {pop, push};
                if (categorical(rng, choice) == 0) {
                    in.push_back(Pop);
                    m -= 1;
                } else {
                    in.push_back(Push);
                    letters(ab, 1);
                    m -= 2;
                }
            }
            break;
        }
        case TaskId::MissingDuplicate: {
            const std::size_t half = n / 2;
            const Token bits[] = {D0, D1};
            letters(bits, half);
            in.insert(in.end(), in.begin(), in.end());
            in[uniform_below(rng, n)] = D2;
            break;
        }
        case TaskId::BinaryAddition:
        case TaskId::BinaryMultiplication: {
            std::vector<double> w(n - 1, 0.0);  // w[k]: left operand length k
            for (std::size_t k = 1; k + 1 < n; ++k) {
                w[k] = static_cast<double>(detail::binary_numbers(k)) * static_cast<double>(detail::binary_numbers(n - 1 - k));
            }
            const std::size_t k = categorical(rng, w);
            detail::sample_binary(k, rng, in);
            in.push_back(task.id == TaskId::BinaryAddition ? Plus : Times);
            detail::sample_binary(n - 1 - k, rng, in);
            break;
        }
        case TaskId::ComputeSqrt:
            detail::sample_binary(n, rng, in);
            break;
    }
    Episode ep{in, task_oracle(task, in)};
    return ep;
}

// --- episodic sequences --------------------------------------------------

struct EpisodeRecord {
    TaskId task = TaskId::EvenPairs;
    Tokens tokens;
    std::vector<std::uint8_t> mask;  // 1 exactly on output positions
    std::uint32_t episodes = 0;      // episodes started before truncation
};

// Appends "x , y ;" to the record, masking y.
inline void append_episode(EpisodeRecord& rec, const Episode& ep) {
    for (Token t : ep.input) {
        rec.tokens.push_back(t);
        rec.mask.push_back(0);
    }
    rec.tokens.push_back(tok::Comma);
    rec.mask.push_back(0);
    for (Token t : ep.output) {
        rec.tokens.push_back(t);
        rec.mask.push_back(1);
    }
    rec.tokens.push_back(tok::Semicolon);
    rec.mask.push_back(0);
    ++rec.episodes;
}

// Episodes of one task, each with an input length uniform over the valid
// lengths in [1, max_input_len], concatenated and cut at target_len.
inline EpisodeRecord assemble_sequence(const TaskSpec& task, std::size_t target_len, Rng& rng,
                                       std::size_t max_input_len = 20) {
    std::vector<std::size_t> lengths;
    for (std::size_t n = 1; n <= max_input_len; ++n) {
        if (valid_input_length(task.id, n)) lengths.push_back(n);
    }
    if (lengths.empty()) throw std::invalid_argument(std::string(task.name) + ": no valid input length");
    EpisodeRecord rec;
    rec.task = task.id;
    while (rec.tokens.size() < target_len) {
        const std::size_t n = lengths[uniform_below(rng, lengths.size())];
        append_episode(rec, generate_episode(task, n, rng));
    }
    rec.tokens.resize(target_len);
    rec.mask.resize(target_len);
    return rec;
}

// Fraction of masked positions where the prediction equals the token.
// A record without masked positions scores 1 (nothing was missed).
inline double masked_accuracy(std::span<const Token> predictions, const EpisodeRecord& rec) {
    if (predictions.size() != rec.tokens.size()) throw std::invalid_argument("masked_accuracy: length mismatch");
    std::size_t total = 0, hits = 0;
    for (std::size_t i = 0; i < rec.tokens.size(); ++i) {
        if (!rec.mask[i]) continue;
        ++total;
        hits += predictions[i] == rec.tokens[i];
    }
    return total == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace solgen
