// Shared fixtures and random-scenario generators for the test suite.
#ifndef TESTS_UTIL_HPP
#define TESTS_UTIL_HPP

#include <random>
#include <utility>
#include <vector>

#include "oracle.hpp"
#include "slopeone/slopeone.hpp"

namespace testutil {

inline slopeone::Dataset to_dataset(const oracle::Table& table,
                                    const slopeone::RatingScale& scale = {1.0, 5.0, 1.0}) {
    slopeone::Dataset data(scale);
    for (const auto& [user, ratings] : table)
        for (const auto& [item, value] : ratings) data.set_rating(user, item, value);
    return data;
}

inline slopeone::Evaluation to_evaluation(unsigned user, const oracle::Ratings& ratings) {
    slopeone::Evaluation u(user);
    for (const auto& [item, value] : ratings) u.set(item, value);
    return u;
}

inline oracle::Table fig1() {
    // two users, two items: the minimal worked example
    return {{0, {{0, 1.0}, {1, 1.5}}}, {1, {{0, 2.0}}}};
}

inline oracle::Table f2() {
    // {u1:{1:1,2:2,3:3}, u2:{1:2,2:4}, u3:{2:3,3:5}} with items 1..3 -> 0..2
    return {{0, {{0, 1.0}, {1, 2.0}, {2, 3.0}}},
            {1, {{0, 2.0}, {1, 4.0}}},
            {2, {{1, 3.0}, {2, 5.0}}}};
}

/// Random table on a 1..5 integer grid, every user nonempty.
inline oracle::Table random_table(std::mt19937_64& rng, unsigned max_users = 5,
                                  unsigned max_items = 5) {
    std::uniform_int_distribution<unsigned> user_count(1, max_users);
    std::uniform_int_distribution<unsigned> item_count(1, max_items);
    std::uniform_int_distribution<int> rating(1, 5);
    std::uniform_int_distribution<int> coin(0, 99);

    const unsigned users = user_count(rng);
    const unsigned items = item_count(rng);
    std::uniform_int_distribution<unsigned> pick_item(0, items - 1);

    oracle::Table table;
    for (unsigned u = 0; u < users; ++u) {
        oracle::Ratings r;
        for (unsigned i = 0; i < items; ++i)
            if (coin(rng) < 55) r[i] = static_cast<double>(rating(rng));
        if (r.empty()) r[pick_item(rng)] = static_cast<double>(rating(rng));
        table[u] = std::move(r);
    }
    return table;
}

/// Random nonempty visitor evaluation over the same item universe.
inline oracle::Ratings random_visitor(std::mt19937_64& rng, unsigned max_items = 5) {
    std::uniform_int_distribution<unsigned> item_count(1, max_items);
    std::uniform_int_distribution<int> rating(1, 5);
    std::uniform_int_distribution<int> coin(0, 99);
    const unsigned items = item_count(rng);
    std::uniform_int_distribution<unsigned> pick_item(0, items - 1);
    oracle::Ratings r;
    for (unsigned i = 0; i < items; ++i)
        if (coin(rng) < 60) r[i] = static_cast<double>(rating(rng));
    if (r.empty()) r[pick_item(rng)] = static_cast<double>(rating(rng));
    return r;
}

inline slopeone::SchemeId to_scheme(oracle::Scheme s) {
    switch (s) {
        case oracle::Scheme::per_user_average: return slopeone::SchemeId::per_user_average;
        case oracle::Scheme::bias_from_mean: return slopeone::SchemeId::bias_from_mean;
        case oracle::Scheme::adjusted_cosine_item:
            return slopeone::SchemeId::adjusted_cosine_item;
        case oracle::Scheme::pearson: return slopeone::SchemeId::pearson;
        case oracle::Scheme::slope_one: return slopeone::SchemeId::slope_one;
        case oracle::Scheme::weighted_slope_one: return slopeone::SchemeId::weighted_slope_one;
        case oracle::Scheme::bipolar_slope_one: return slopeone::SchemeId::bipolar_slope_one;
    }
    return slopeone::SchemeId::per_user_average;
}

inline const std::vector<oracle::Scheme>& all_oracle_schemes() {
    static const std::vector<oracle::Scheme> schemes = {
        oracle::Scheme::per_user_average,    oracle::Scheme::bias_from_mean,
        oracle::Scheme::adjusted_cosine_item, oracle::Scheme::pearson,
        oracle::Scheme::slope_one,           oracle::Scheme::weighted_slope_one,
        oracle::Scheme::bipolar_slope_one,
    };
    return schemes;
}

/// Compare two stores structurally: counts exact, diff-sums within tol.
inline bool stores_close(const std::vector<slopeone::PairRecord>& a,
                         const std::vector<slopeone::PairRecord>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].lo != b[k].lo || a[k].hi != b[k].hi || a[k].count != b[k].count) return false;
        if (std::abs(a[k].diff_sum - b[k].diff_sum) > tol) return false;
    }
    return true;
}

}  // namespace testutil

#endif  // TESTS_UTIL_HPP
