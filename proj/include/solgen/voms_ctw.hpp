#pragma once

// Variable-order Markov sources (binary suffix trees with Beta(1/2,1/2) leaf
// parameters) and the Context Tree Weighting predictor.
//
// A context is read most-recent-bit first: the leaf "01" matches histories
// ending in ...1 0 (x_{t-1} = 0, x_{t-2} = 1). Bits before the start of the
// sequence are 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "solgen/rng.hpp"

namespace solgen {

using Bits = std::vector<std::uint8_t>;

inline constexpr int kMaxTreeDepth = 32;

// Bit at lag k (1-based) before position t, zero-padded.
inline std::uint8_t lagged_bit(std::span<const std::uint8_t> history, std::size_t t, std::size_t k) {
    return k <= t ? history[t - k] : std::uint8_t{0};
}

struct VomsLeaf {
    std::uint32_t depth = 0;
    std::uint32_t bits = 0;  // bit k-1 holds the context bit at lag k
    double theta = 0.5;      // probability of emitting 0

    std::string context() const {
        std::string s;
        for (std::uint32_t k = 0; k < depth; ++k) s.push_back((bits >> k) & 1u ? '1' : '0');
        return s;
    }

    friend bool operator==(const VomsLeaf&, const VomsLeaf&) = default;
};

class SuffixTree {
public:
    struct Node {
        std::array<std::int32_t, 2> child{-1, -1};
        std::int32_t leaf = -1;
    };

    SuffixTree() : SuffixTree(0, {VomsLeaf{}}) {}

    // Rebuilds the node array; throws unless the leaves form a complete,
    // suffix-free set of depth <= max_depth.
    SuffixTree(std::uint32_t max_depth, std::vector<VomsLeaf> leaves)
        : max_depth_(max_depth), leaves_(std::move(leaves)) {
        if (max_depth_ > kMaxTreeDepth) throw std::invalid_argument("SuffixTree: depth above 32");
        nodes_.emplace_back();
        for (std::size_t i = 0; i < leaves_.size(); ++i) {
            const VomsLeaf& lf = leaves_[i];
            if (lf.depth > max_depth_) throw std::invalid_argument("SuffixTree: leaf deeper than max depth");
            if (!(lf.theta >= 0.0 && lf.theta <= 1.0)) throw std::invalid_argument("SuffixTree: theta outside [0,1]");
            std::int32_t n = 0;
            for (std::uint32_t k = 0; k < lf.depth; ++k) {
                if (nodes_[n].leaf >= 0) throw std::invalid_argument("SuffixTree: leaf set is not suffix-free");
                const auto b = (lf.bits >> k) & 1u;
                if (nodes_[n].child[b] < 0) {
                    nodes_[n].child[b] = static_cast<std::int32_t>(nodes_.size());
                    nodes_.emplace_back();
                }
                n = nodes_[n].child[b];
            }
            if (nodes_[n].leaf >= 0 || nodes_[n].child[0] >= 0 || nodes_[n].child[1] >= 0) {
                throw std::invalid_argument("SuffixTree: leaf set is not suffix-free");
            }
            nodes_[n].leaf = static_cast<std::int32_t>(i);
        }
        for (const Node& n : nodes_) {
            const bool internal = n.child[0] >= 0 || n.child[1] >= 0;
            if (internal ? (n.child[0] < 0 || n.child[1] < 0) : n.leaf < 0) {
                throw std::invalid_argument("SuffixTree: leaf set is not complete");
            }
        }
    }

    std::uint32_t max_depth() const noexcept { return max_depth_; }
    const std::vector<VomsLeaf>& leaves() const noexcept { return leaves_; }
    std::size_t leaf_count() const noexcept { return leaves_.size(); }

    std::uint32_t depth() const noexcept {
        std::uint32_t d = 0;
        for (const auto& l : leaves_) d = std::max(d, l.depth);
        return d;
    }

    // Leaf matching the context of position t in `history`.
    const VomsLeaf& find_leaf(std::span<const std::uint8_t> history, std::size_t t) const {
        std::int32_t n = 0;
        for (std::size_t k = 1; nodes_[n].leaf < 0; ++k) n = nodes_[n].child[lagged_bit(history, t, k)];
        return leaves_[static_cast<std::size_t>(nodes_[n].leaf)];
    }

private:
    std::uint32_t max_depth_ = 0;
    std::vector<VomsLeaf> leaves_;
    std::vector<Node> nodes_;
};

// Beta(1/2, 1/2) by inversion: the arcsine law.
inline double sample_arcsine(Rng& rng) {
    const double s = std::sin(std::numbers::pi * uniform01(rng) / 2.0);
    return s * s;
}

// Recursive freeze/split construction. Node at depth d < D splits with
// probability alphas[d] (1/2 when alphas is shorter); depth-D nodes freeze.
// Draw order: split decision, then child 0 before child 1; theta on freeze.
inline SuffixTree sample_tree(std::uint32_t max_depth, std::span<const double> alphas, Rng& rng) {
    if (max_depth > kMaxTreeDepth) throw std::invalid_argument("sample_tree: depth above 32");
    for (double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("sample_tree: split probabilities must lie in (0,1)");
    }
    std::vector<VomsLeaf> leaves;
    std::function<void(std::uint32_t, std::uint32_t)> grow = [&](std::uint32_t d, std::uint32_t bits) {
        const double alpha = d < alphas.size() ? alphas[d] : 0.5;
        if (d < max_depth && bernoulli(rng, alpha)) {
            grow(d + 1, bits);
            grow(d + 1, bits | (1u << d));
        } else {
            leaves.push_back(VomsLeaf{d, bits, sample_arcsine(rng)});
        }
    };
    grow(0, 0);
    return SuffixTree(max_depth, std::move(leaves));
}

inline SuffixTree sample_tree(std::uint32_t max_depth, Rng& rng) {
    return sample_tree(max_depth, std::span<const double>{}, rng);
}

struct VomsSequence {
    Bits bits;
    std::vector<double> p_zero;  // ground-truth probability of 0 at each step
};

inline VomsSequence sample_sequence(const SuffixTree& tree, std::size_t n, Rng& rng) {
    VomsSequence out;
    out.bits.reserve(n);
    out.p_zero.reserve(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double theta = tree.find_leaf(out.bits, t).theta;
        out.p_zero.push_back(theta);
        out.bits.push_back(bernoulli(rng, theta) ? 0 : 1);
    }
    return out;
}

// Exact pmf of the sampled tree depth with all split probabilities 1/2.
inline std::vector<double> tree_depth_pmf(std::uint32_t max_depth) {
    std::vector<double> pmf(max_depth + 1);
    if (max_depth == 0) {
        pmf[0] = 1.0;
        return pmf;
    }
    double prev = 0.5;  // F(0)
    pmf[0] = prev;
    for (std::uint32_t d = 1; d < max_depth; ++d) {
        const double f = 0.5 + 0.5 * prev * prev;
        pmf[d] = f - prev;
        prev = f;
    }
    pmf[max_depth] = 1.0 - prev;
    return pmf;
}

// --- KT and CTW ----------------------------------------------------------

// log P_KT(a, b) in closed form.
inline double kt_log(std::uint64_t a, std::uint64_t b) {
    const double da = static_cast<double>(a), db = static_cast<double>(b);
    return std::lgamma(da + 0.5) + std::lgamma(db + 0.5) - std::lgamma(da + db + 1.0) - std::log(std::numbers::pi);
}

// KT predictive probability of `bit` after a zeros and b ones.
inline double kt_predictive(std::uint64_t a, std::uint64_t b, int bit) {
    const double c = static_cast<double>(bit == 0 ? a : b);
    return (c + 0.5) / (static_cast<double>(a + b) + 1.0);
}

// log(exp(u)/2 + exp(v)/2) without overflow or underflow.
inline double log_half_sum(double u, double v) {
    const double hi = std::max(u, v);
    return hi + std::log1p(std::exp(-std::abs(u - v))) - std::numbers::ln2;
}

struct CtwNode {
    std::uint32_t a = 0;  // zeros seen in this context
    std::uint32_t b = 0;  // ones
    double log_kt = 0.0;
    double log_ctw = 0.0;
    std::array<std::int32_t, 2> child{-1, -1};
};

class CtwPredictor {
public:
    explicit CtwPredictor(std::uint32_t depth) : depth_(depth), context_(depth, 0) {
        if (depth > kMaxTreeDepth) throw std::invalid_argument("CtwPredictor: depth above 32");
        nodes_.emplace_back();
    }

    std::uint32_t depth() const noexcept { return depth_; }
    double log_probability() const noexcept { return nodes_[0].log_ctw; }
    std::size_t node_count() const noexcept { return nodes_.size(); }

    void reset() {
        nodes_.assign(1, CtwNode{});
        std::fill(context_.begin(), context_.end(), std::uint8_t{0});
    }

    // Predictive probability of `bit`; the state is left untouched.
    double probability(int bit) const {
        std::array<std::int32_t, kMaxTreeDepth + 1> path{};
        std::size_t len = 0;
        std::int32_t n = 0;
        for (std::uint32_t d = 0;; ++d) {
            path[len++] = n;
            if (d == depth_) break;
            n = nodes_[n].child[context_[d]];
            if (n < 0) break;
        }
        // Nodes below the materialized path are fresh: their updated
        // probability is the KT probability 1/2 of one symbol at every depth.
        double below = len < depth_ + 1u ? -std::numbers::ln2 : 0.0;
        for (std::size_t i = len; i-- > 0;) {
            const CtwNode& node = nodes_[path[i]];
            const std::uint32_t d = static_cast<std::uint32_t>(i);
            const double kt = node.log_kt + std::log(kt_predictive(node.a, node.b, bit));
            if (d == depth_) {
                below = kt;
                continue;
            }
            const int on = context_[d];
            const std::int32_t off = node.child[1 - on];
            const double off_log = off < 0 ? 0.0 : nodes_[off].log_ctw;
            below = log_half_sum(kt, below + off_log);
        }
        return std::exp(below - nodes_[0].log_ctw);
    }

    // Incorporates `bit` and returns the probability assigned to it.
    double update(int bit) {
        if (bit != 0 && bit != 1) throw std::invalid_argument("CtwPredictor: symbol must be 0 or 1");
        std::array<std::int32_t, kMaxTreeDepth + 1> path{};
        std::int32_t n = 0;
        for (std::uint32_t d = 0; d <= depth_; ++d) {
            path[d] = n;
            if (d == depth_) break;
            const int c = context_[d];
            if (nodes_[n].child[c] < 0) {
                const auto fresh = static_cast<std::int32_t>(nodes_.size());
                nodes_.emplace_back();
                nodes_[n].child[c] = fresh;
            }
            n = nodes_[n].child[c];
        }
        const double before = nodes_[0].log_ctw;
        for (std::uint32_t i = depth_ + 1; i-- > 0;) {
            CtwNode& node = nodes_[path[i]];
            node.log_kt += std::log(kt_predictive(node.a, node.b, bit));
            (bit == 0 ? node.a : node.b) += 1;
            if (i == depth_) {
                node.log_ctw = node.log_kt;
            } else {
                double children = 0.0;
                for (std::int32_t c : node.child) {
                    if (c >= 0) children += nodes_[c].log_ctw;
                }
                node.log_ctw = log_half_sum(node.log_kt, children);
            }
        }
        if (depth_ > 0) {
            std::copy_backward(context_.begin(), context_.end() - 1, context_.end());
            context_[0] = static_cast<std::uint8_t>(bit);
        }
        return std::exp(nodes_[0].log_ctw - before);
    }

    const CtwNode& root() const noexcept { return nodes_[0]; }

private:
    std::uint32_t depth_;
    std::vector<std::uint8_t> context_;  // context_[k] = bit at lag k+1
    std::vector<CtwNode> nodes_;
};

inline double ctw_log_probability(std::uint32_t depth, std::span<const std::uint8_t> bits) {
    CtwPredictor ctw(depth);
    for (auto b : bits) ctw.update(b);
    return ctw.log_probability();
}

// Fixed-order KT: one KT estimator per length-k context.
class KtPredictor {
public:
    explicit KtPredictor(std::uint32_t order) : order_(order), counts_(std::size_t{1} << order) {
        if (order > 20) throw std::invalid_argument("KtPredictor: order above 20");
    }

    std::uint32_t order() const noexcept { return order_; }

    void reset() {
        std::fill(counts_.begin(), counts_.end(), std::array<std::uint32_t, 2>{});
        ctx_ = 0;
    }

    double probability(int bit) const {
        const auto& c = counts_[ctx_];
        return kt_predictive(c[0], c[1], bit);
    }

    double update(int bit) {
        if (bit != 0 && bit != 1) throw std::invalid_argument("KtPredictor: symbol must be 0 or 1");
        const double p = probability(bit);
        ++counts_[ctx_][static_cast<std::size_t>(bit)];
        if (order_ > 0) {
            const std::uint32_t mask = (1u << order_) - 1u;
            ctx_ = ((ctx_ << 1) | static_cast<std::uint32_t>(bit)) & mask;
        }
        return p;
    }

private:
    std::uint32_t order_;
    std::uint32_t ctx_ = 0;
    std::vector<std::array<std::uint32_t, 2>> counts_;
};

// Exact Bayes mixture over every suffix tree of depth <= D under the
// freeze/split prior (1/2 each below D), each leaf with a KT estimator.
// Counts are gathered by direct suffix matching, independent of CTW.
inline double brute_force_mixture(std::uint32_t max_depth, std::span<const std::uint8_t> bits) {
    if (max_depth > 3 || bits.size() > 16) {
        throw std::invalid_argument("brute_force_mixture: guard is D <= 3 and length <= 16");
    }
    struct Tree {
        double prior;
        std::vector<std::pair<std::uint32_t, std::uint32_t>> leaves;  // (depth, bits)
    };
    std::function<std::vector<Tree>(std::uint32_t, std::uint32_t)> trees = [&](std::uint32_t d, std::uint32_t ctx) {
        std::vector<Tree> out;
        if (d == max_depth) {
            out.push_back({1.0, {{d, ctx}}});
            return out;
        }
        out.push_back({0.5, {{d, ctx}}});
        for (const Tree& l : trees(d + 1, ctx)) {
            for (const Tree& r : trees(d + 1, ctx | (1u << d))) {
                Tree t{0.5 * l.prior * r.prior, l.leaves};
                t.leaves.insert(t.leaves.end(), r.leaves.begin(), r.leaves.end());
                out.push_back(std::move(t));
            }
        }
        return out;
    };
    double total = 0.0;
    for (const Tree& tree : trees(0, 0)) {
        double p = tree.prior;
        for (const auto& [depth, ctx] : tree.leaves) {
            std::uint64_t a = 0, b = 0;
            for (std::size_t t = 0; t < bits.size(); ++t) {
                bool match = true;
                for (std::uint32_t k = 1; k <= depth && match; ++k) {
                    match = lagged_bit(bits, t, k) == ((ctx >> (k - 1)) & 1u);
                }
                if (match) (bits[t] == 0 ? a : b) += 1;
            }
            p *= std::exp(kt_log(a, b));
        }
        total += p;
    }
    return total;
}

}  // namespace solgen
