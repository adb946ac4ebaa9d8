#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "golden_rows.hpp"
#include "solgen/chomsky_tasks.hpp"

using namespace solgen;

namespace {

std::string run_oracle(std::string_view task, std::string_view input) {
    return TokenVocab::decode(task_oracle(task_spec(task), TokenVocab::encode(input)));
}

std::uint64_t value_of(std::span<const Token> bits) {
    std::uint64_t v = 0;
    for (Token b : bits) v = (v << 1) | b;
    return v;
}

Tokens binary_of(std::uint64_t v, std::size_t width) {
    Tokens out(width);
    for (std::size_t i = 0; i < width; ++i) out[width - 1 - i] = static_cast<Token>((v >> i) & 1u);
    return out;
}

}  // namespace

class GoldenRow : public ::testing::TestWithParam<golden::Row> {};

TEST_P(GoldenRow, OracleReproducesExample) {
    const auto& row = GetParam();
    EXPECT_EQ(run_oracle(row.task, row.input), row.output);
}

// Three published rows disagree with the task definitions; see the
// CorrectedRows tests below.
INSTANTIATE_TEST_SUITE_P(Table, GoldenRow, ::testing::ValuesIn([] {
                             std::vector<golden::Row> rows;
                             for (const auto& r : golden::kRows) {
                                 if (r.task != "binary_multiplication" && r.task != "compute_sqrt" &&
                                     r.task != "solve_equation") {
                                     rows.push_back(r);
                                 }
                             }
                             return rows;
                         }()),
                         [](const auto& info) { return std::string(info.param.task); });

TEST(CorrectedRows, BinaryMultiplicationIsTheProduct) {
    EXPECT_EQ(run_oracle("binary_multiplication", "10010*101"), "1011010");  // 18 * 5 = 90
}

TEST(CorrectedRows, ComputeSqrtIsTheFloorRoot) {
    EXPECT_EQ(run_oracle("compute_sqrt", "100010"), "101");  // floor(sqrt(34)) = 5
}

TEST(CorrectedRows, DegenerateEquationIsRejected) {
    // 4 - 3*(-2) = 10 = 0 (mod 5): every x solves it.
    try {
        run_oracle("solve_equation", "-(x-2)*(4-3*(-2))");
        FAIL() << "expected MalformedInput";
    } catch (const MalformedInput& e) {
        EXPECT_NE(std::string(e.what()).find("Solve Equation"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("5 solutions"), std::string::npos);
    }
    EXPECT_EQ(run_oracle("solve_equation", "x+4"), "1");
    EXPECT_EQ(run_oracle("solve_equation", "2*x-(1)"), "3");
}

TEST(Catalogue, FifteenTasksWithLevels) {
    ASSERT_EQ(all_tasks().size(), 15u);
    std::map<std::string_view, int> per_level;
    for (const auto& t : all_tasks()) ++per_level[level_name(t.level)];
    EXPECT_EQ(per_level["R"], 4);
    EXPECT_EQ(per_level["DCF"], 4);
    EXPECT_EQ(per_level["CS"], 7);
    EXPECT_EQ(task_spec("Compute Sqrt").id, TaskId::ComputeSqrt);
    EXPECT_THROW(task_spec("nope"), std::invalid_argument);
}

TEST(Vocab, BijectiveAndRoundTrips) {
    std::set<std::string_view> seen;
    for (int id = 0; id < kVocabSize; ++id) {
        const auto s = TokenVocab::surface(static_cast<Token>(id));
        EXPECT_TRUE(seen.insert(s).second);
        EXPECT_EQ(TokenVocab::lookup(s), static_cast<Token>(id));
    }
    const Tokens t = TokenVocab::encode("abbaa POP PUSH a POP");
    EXPECT_EQ(t, (Tokens{tok::A, tok::B, tok::B, tok::A, tok::A, tok::Pop, tok::Push, tok::A, tok::Pop}));
    EXPECT_EQ(TokenVocab::decode(t), "abbaa POP PUSH a POP");
    EXPECT_THROW(TokenVocab::encode("q"), std::invalid_argument);
    EXPECT_THROW(TokenVocab::surface(19), std::out_of_range);
}

TEST(Vocab, EpisodesRoundTripThroughText) {
    Rng rng(12);
    for (const auto& task : all_tasks()) {
        std::size_t n = 9;
        while (!valid_input_length(task.id, n)) ++n;
        for (int i = 0; i < 20; ++i) {
            const auto ep = generate_episode(task, n, rng);
            EXPECT_EQ(TokenVocab::encode(TokenVocab::decode(ep.input)), ep.input) << task.name;
            EXPECT_EQ(TokenVocab::encode(TokenVocab::decode(ep.output)), ep.output) << task.name;
        }
    }
}

TEST(Vocab, TableMatchesShippedFile) {
    std::ostringstream os;
    TokenVocab::write_table(os);
    std::ifstream in(SOLGEN_SOURCE_DIR "/docs/token_table_v1.tsv");
    ASSERT_TRUE(in);
    std::stringstream file;
    file << in.rdbuf();
    EXPECT_EQ(os.str(), file.str());
}

TEST(Oracles, MalformedInputsNameTheTask) {
    for (const auto& [task, input] : std::vector<std::pair<std::string_view, std::string_view>>{
             {"even_pairs", ""},
             {"binary_addition", "10+"},
             {"modular_arithmetic_simple", "(1+2)"},
             {"missing_duplicate", "101"},
             {"stack_manipulation", "a PUSH"},
             {"parity_check", "a0"}}) {
        try {
            run_oracle(task, input);
            ADD_FAILURE() << task << " accepted '" << input << "'";
        } catch (const MalformedInput& e) {
            EXPECT_NE(std::string(e.what()).find(task_spec(task).name), std::string::npos) << e.what();
        }
    }
}

TEST(Oracles, StackPopOnEmptyIsNoOp) {
    EXPECT_EQ(run_oracle("stack_manipulation", "POP PUSH b"), "b");
    EXPECT_EQ(run_oracle("stack_manipulation", "a POP POP"), "");
}

TEST(Oracles, MultiplicationEqualsRepeatedAddition) {
    const auto& add = task_spec(TaskId::BinaryAddition);
    const auto& mul = task_spec(TaskId::BinaryMultiplication);
    for (std::size_t lx = 1; lx <= 8; ++lx) {
        for (std::uint64_t x = 0; x < (1u << lx); x += (lx > 5 ? 7 : 1)) {
            for (std::size_t ly = 1; ly <= 8; ly += (ly > 4 ? 3 : 1)) {
                const std::uint64_t y = (x * 2654435761u + ly) % (1u << ly);
                Tokens in = binary_of(x, lx);
                in.push_back(tok::Times);
                const Tokens yb = binary_of(y, ly);
                in.insert(in.end(), yb.begin(), yb.end());
                Tokens acc{tok::D0};
                for (std::uint64_t i = 0; i < y; ++i) {
                    Tokens sum = acc;
                    sum.push_back(tok::Plus);
                    const Tokens xb = binary_of(x, lx);
                    sum.insert(sum.end(), xb.begin(), xb.end());
                    acc = task_oracle(add, sum);
                }
                const auto prod = task_oracle(mul, in);
                EXPECT_EQ(prod, acc);
                EXPECT_EQ(value_of(prod), x * y);
            }
        }
    }
}

TEST(Oracles, SqrtIsFloorRootUpToLength12) {
    const auto& spec = task_spec(TaskId::ComputeSqrt);
    for (std::size_t len = 1; len <= 12; ++len) {
        for (std::uint64_t v = 0; v < (1u << len); ++v) {
            const auto out = value_of(task_oracle(spec, binary_of(v, len)));
            ASSERT_LE(out * out, v);
            ASSERT_GT((out + 1) * (out + 1), v);
        }
    }
}

TEST(Oracles, BucketSortAndOddsFirst) {
    EXPECT_EQ(run_oracle("odds_first", "abbab"), "abbba");
    EXPECT_EQ(run_oracle("bucket_sort", "0"), "0");
    EXPECT_EQ(run_oracle("cycle_navigation", ""), "0");
}

TEST(Grammar, CountsMatchExhaustiveEnumeration) {
    struct Case {
        TaskId id;
        bool full, variable;
        std::size_t max_len;
    };
    for (const Case c : {Case{TaskId::ModularArithmeticSimple, false, false, 7},
                         Case{TaskId::ModularArithmetic, true, false, 6},
                         Case{TaskId::SolveEquation, true, true, 6}}) {
        const auto& alphabet = task_spec(c.id).input_alphabet;
        for (std::size_t n = 1; n <= c.max_len; ++n) {
            std::array<std::uint64_t, 2> found{};
            Tokens s(n);
            std::uint64_t total = 1;
            for (std::size_t i = 0; i < n; ++i) total *= alphabet.size();
            for (std::uint64_t code = 0; code < total; ++code) {
                std::uint64_t r = code;
                for (auto& t : s) {
                    t = alphabet[r % alphabet.size()];
                    r /= alphabet.size();
                }
                const auto xs = std::count(s.begin(), s.end(), tok::X);
                if (xs > 1) continue;
                if (detail::ModParser(s, {c.full, c.variable}, 0).parse()) ++found[static_cast<std::size_t>(xs)];
            }
            const auto& counts = detail::expr_counts(c.id);
            EXPECT_EQ(counts.expressions(n, 0), found[0]) << task_spec(c.id).name << " n=" << n;
            if (c.variable) EXPECT_EQ(counts.expressions(n, 1), found[1]) << "n=" << n;
        }
    }
}

TEST(Generation, ExpressionsAreUniformOverWellFormedStrings) {
    // Length 3 simple expressions: 5 * 3 * 5 = 75 strings.
    Rng rng(21);
    std::map<Tokens, int> hits;
    const int n = 75000;
    for (int i = 0; i < n; ++i) ++hits[generate_episode(task_spec(TaskId::ModularArithmeticSimple), 3, rng).input];
    ASSERT_EQ(hits.size(), 75u);
    for (const auto& [s, h] : hits) EXPECT_NEAR(h, 1000, 5 * std::sqrt(1000.0)) << TokenVocab::decode(s);
}

TEST(Generation, StackInputsAreUniform) {
    // Reference set built directly from the input grammar.
    std::set<Tokens> all;
    const Token letters[] = {tok::A, tok::B};
    std::function<void(Tokens, bool)> grow = [&](Tokens cur, bool ops) {
        if (cur.size() == 3) {
            all.insert(cur);
            return;
        }
        if (!ops) {
            for (Token l : letters) {
                Tokens c = cur;
                c.push_back(l);
                grow(c, false);
            }
        }
        Tokens pop = cur;
        pop.push_back(tok::Pop);
        grow(pop, true);
        if (cur.size() + 2 <= 3) {
            for (Token l : letters) {
                Tokens c = cur;
                c.push_back(tok::Push);
                c.push_back(l);
                grow(c, true);
            }
        }
    };
    grow({}, false);
    Rng rng(5);
    std::map<Tokens, int> hits;
    const int per = 2000;
    const int n = per * static_cast<int>(all.size());
    for (int i = 0; i < n; ++i) ++hits[generate_episode(task_spec(TaskId::StackManipulation), 3, rng).input];
    ASSERT_EQ(hits.size(), all.size());
    for (const auto& [s, h] : hits) {
        EXPECT_TRUE(all.count(s));
        EXPECT_NEAR(h, per, 5 * std::sqrt(double(per)));
    }
}

TEST(Generation, ParityMatchesDirectCount) {
    Rng rng(8);
    for (int i = 0; i < 500; ++i) {
        const auto ep = generate_episode(task_spec(TaskId::ParityCheck), 6, rng);
        ASSERT_EQ(ep.input.size(), 6u);
        const auto bs = std::count(ep.input.begin(), ep.input.end(), tok::B);
        EXPECT_EQ(ep.output, Tokens{bs % 2 == 0 ? tok::True : tok::False});
    }
}

TEST(Generation, SolveEquationHasUniqueSolution) {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto ep = generate_episode(task_spec(TaskId::SolveEquation), 7, rng);
        const auto sols = detail::equation_solutions(ep.input);
        ASSERT_TRUE(sols);
        ASSERT_EQ(sols->size(), 1u);
        EXPECT_EQ(ep.output, Tokens{static_cast<Token>(sols->front())});
    }
}

TEST(Generation, InvalidLengthsThrow) {
    Rng rng(1);
    EXPECT_THROW(generate_episode(task_spec(TaskId::MissingDuplicate), 3, rng), std::invalid_argument);
    EXPECT_THROW(generate_episode(task_spec(TaskId::BinaryAddition), 2, rng), std::invalid_argument);
    EXPECT_THROW(generate_episode(task_spec(TaskId::ModularArithmeticSimple), 2, rng), std::invalid_argument);
    EXPECT_THROW(generate_episode(task_spec(TaskId::EvenPairs), 0, rng), std::invalid_argument);
}

TEST(Episodes, ReverseStringLayout) {
    EpisodeRecord rec;
    const Tokens x = TokenVocab::encode("aabba");
    append_episode(rec, Episode{x, task_oracle(TaskId::ReverseString, x)});
    EXPECT_EQ(rec.tokens, TokenVocab::encode("aabba,abbaa;"));
    EXPECT_EQ(rec.mask, (std::vector<std::uint8_t>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0}));
}

TEST(Episodes, AssembledSequencesHonourContracts) {
    for (const auto& task : all_tasks()) {
        Rng rng(31);
        const auto rec = assemble_sequence(task, 256, rng);
        ASSERT_EQ(rec.tokens.size(), 256u);
        ASSERT_EQ(rec.mask.size(), 256u);
        EXPECT_GE(rec.episodes, 1u);
        for (std::size_t i = 0; i < 256; ++i) {
            if (rec.tokens[i] == tok::Comma || rec.tokens[i] == tok::Semicolon) EXPECT_EQ(rec.mask[i], 0);
            if (rec.mask[i]) {
                const auto& out = task.output_alphabet;
                EXPECT_NE(std::find(out.begin(), out.end(), rec.tokens[i]), out.end());
            }
        }
        Rng again(31);
        EXPECT_EQ(assemble_sequence(task, 256, again).tokens, rec.tokens) << task.name;
    }
}

TEST(Episodes, MaskedAccuracy) {
    Rng rng(4);
    const auto rec = assemble_sequence(task_spec(TaskId::DuplicateString), 128, rng);
    EXPECT_DOUBLE_EQ(masked_accuracy(rec.tokens, rec), 1.0);
    EXPECT_DOUBLE_EQ(masked_accuracy(Tokens(128, tok::Pop), rec), 0.0);
    const auto masked = static_cast<std::size_t>(std::count(rec.mask.begin(), rec.mask.end(), 1));
    Tokens half = rec.tokens;
    for (std::size_t i = 0, wrong = 0; i < half.size() && wrong < masked / 2; ++i) {
        if (rec.mask[i]) {
            half[i] = tok::Pop;
            ++wrong;
        }
    }
    EXPECT_DOUBLE_EQ(masked_accuracy(half, rec), double(masked - masked / 2) / double(masked));
    EXPECT_THROW(masked_accuracy(Tokens(3), rec), std::invalid_argument);
}
