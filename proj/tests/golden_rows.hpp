#pragma once

#include <array>
#include <string_view>

namespace solgen::golden {

struct Row {
    std::string_view task;
    std::string_view input;
    std::string_view output;
};

// One published example per task, in catalogue order.
inline constexpr std::array<Row, 15> kRows = {{
    {"even_pairs", "aabba", "True"},
    {"modular_arithmetic_simple", "1+2-4", "4"},
    {"parity_check", "aaabba", "True"},
    {"cycle_navigation", "011210", "2"},
    {"stack_manipulation", "abbaa POP PUSH a POP", "abba"},
    {"reverse_string", "aabba", "abbaa"},
    {"modular_arithmetic", "-(1-2)*(4-3*(-2))", "0"},
    {"solve_equation", "-(x-2)*(4-3*(-2))", "1"},
    {"duplicate_string", "abaab", "abaababaab"},
    {"missing_duplicate", "10011021", "0"},
    {"odds_first", "aaabaa", "aaaaba"},
    {"binary_addition", "10010+101", "10111"},
    {"binary_multiplication", "10010*101", "1001000"},
    {"compute_sqrt", "100010", "110"},
    {"bucket_sort", "421302214", "011222344"},
}};

}  // namespace solgen::golden
