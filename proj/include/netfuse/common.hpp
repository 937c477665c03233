#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace netfuse {

// Thrown on malformed input files or records that violate the documented schemas.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown on dimension mismatches and invalid argument combinations.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a numerical routine breaks down (factorization failure, non-convergence).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Chunked summation: accumulates fixed-size blocks sequentially and then reduces
// the block sums in index order, so the result does not depend on how the blocks
// were produced (serial or one thread per block).
class ChunkedSum {
public:
    static constexpr std::size_t kChunk = 4096;

    static double reduce(const std::vector<double>& partials)
    {
        double acc = 0.0;
        for (double v : partials) acc += v;
        return acc;
    }

    template <typename F>
    static double sum(std::size_t n, F&& term)
    {
        std::vector<double> partials((n + kChunk - 1) / kChunk, 0.0);
        for (std::size_t c = 0; c < partials.size(); ++c) {
            const std::size_t lo = c * kChunk;
            const std::size_t hi = std::min(n, lo + kChunk);
            double s = 0.0;
            for (std::size_t i = lo; i < hi; ++i) s += term(i);
            partials[c] = s;
        }
        return reduce(partials);
    }
};

// Poisson sampler with a fixed algorithm so that synthetic panels are reproducible
// across standard libraries. Knuth multiplication for small means; for large means
// the mean is split additively, which keeps the draw exact.
class PoissonSampler {
public:
    explicit PoissonSampler(std::uint64_t seed) : rng_(seed), unif_(0.0, 1.0) {}

    std::int64_t draw(double mean)
    {
        if (!(mean >= 0.0)) throw ValidationError("Poisson mean must be non-negative");
        std::int64_t total = 0;
        while (mean > 30.0) {
            total += knuth(30.0);
            mean -= 30.0;
        }
        return total + knuth(mean);
    }

    double uniform() { return unif_(rng_); }
    std::uint64_t raw() { return rng_(); }

private:
    std::int64_t knuth(double mean)
    {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        double p = 1.0;
        std::int64_t k = 0;
        do {
            ++k;
            p *= unif_(rng_);
        } while (p > limit);
        return k - 1;
    }

    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> unif_;
};

// Disjoint-set forest with union by rank and path halving.
class DisjointSet {
public:
    explicit DisjointSet(int n) : parent_(n), rank_(n, 0)
    {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    bool unite(int a, int b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }

    int component_count()
    {
        int c = 0;
        for (int i = 0; i < static_cast<int>(parent_.size()); ++i)
            if (find(i) == i) ++c;
        return c;
    }

    // Labels components 0..k-1 in order of first appearance.
    std::vector<int> compressed_labels()
    {
        std::vector<int> label(parent_.size(), -1);
        int next = 0;
        for (int i = 0; i < static_cast<int>(parent_.size()); ++i) {
            int r = find(i);
            if (label[r] < 0) label[r] = next++;
            label[i] = label[r];
        }
        return label;
    }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
};

}  // namespace netfuse
