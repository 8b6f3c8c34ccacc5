#ifndef SLOPEONE_HARNESS_HPP
#define SLOPEONE_HARNESS_HPP

#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "slopeone/core.hpp"
#include "slopeone/predictors.hpp"
#include "slopeone/text.hpp"

namespace slopeone {

// ---------------------------------------------------------------------------
// Train/test split at whole-user granularity.
// ---------------------------------------------------------------------------

enum class SelectionOrder {
    dataset_order,   // users in ascending id order
    seeded_shuffle,  // deterministic Fisher-Yates permutation of the users
};

inline const char* selection_order_name(SelectionOrder order) {
    return order == SelectionOrder::dataset_order ? "dataset-order" : "seeded-shuffle";
}

struct SplitSpec {
    std::size_t train_ratings = 0;  // keep adding users until >= this many
    // Optional cap on the held-out side; unset means "all remaining users".
    std::optional<std::size_t> test_ratings;
    SelectionOrder order = SelectionOrder::seeded_shuffle;
    std::uint64_t seed = 0;
};

struct SplitResult {
    Dataset train;
    std::vector<Evaluation> test_users;
    std::size_t train_rating_count = 0;
    std::size_t test_rating_count = 0;
    // True when a requested test target could not be met before the corpus
    // ran out; the split then keeps every remaining user (callers warn).
    bool test_target_relaxed = false;
};

namespace detail {

/// Hand-rolled Fisher-Yates so the permutation is identical on every
/// platform (std::shuffle's draw algorithm is implementation-defined).
inline void deterministic_shuffle(std::vector<user_id>& ids, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(ids[i - 1], ids[j]);
    }
}

}  // namespace detail

/// Assigns whole users to the training side, in the requested order, until
/// the training set holds at least `train_ratings` ratings; everyone else
/// becomes a held-out test user.
inline SplitResult split(const Dataset& full, const SplitSpec& spec) {
    if (spec.train_ratings > full.rating_count())
        throw DataError("requested " + std::to_string(spec.train_ratings) +
                        " training ratings but the corpus has only " +
                        std::to_string(full.rating_count()));

    std::vector<user_id> order;
    order.reserve(full.active_user_count());
    for (const Evaluation& u : full)
        if (!u.empty()) order.push_back(u.user());
    if (spec.order == SelectionOrder::seeded_shuffle)
        detail::deterministic_shuffle(order, spec.seed);

    SplitResult result;
    result.train = Dataset(full.scale());
    for (user_id uid : order) {
        const Evaluation& u = full.evaluation(uid);
        if (result.train_rating_count < spec.train_ratings) {
            for (const auto& [item, value] : u) result.train.set_rating(uid, item, value);
            result.train_rating_count += u.size();
        } else if (!spec.test_ratings || result.test_rating_count < *spec.test_ratings) {
            result.test_users.push_back(u);
            result.test_rating_count += u.size();
        }
    }
    if (spec.test_ratings && result.test_rating_count < *spec.test_ratings)
        result.test_target_relaxed = true;
    return result;
}

// ---------------------------------------------------------------------------
// All-but-one mean absolute error.
// ---------------------------------------------------------------------------

struct SchemeReport {
    SchemeId scheme = SchemeId::per_user_average;
    std::size_t users_scored = 0;
    std::size_t users_skipped = 0;  // test users with fewer than two ratings
    std::size_t predictions = 0;
    double mae_sum = 0.0;  // sum of per-user MAEs
    std::map<int, std::size_t> fallback_depths;

    /// Average of the per-user MAEs (every test user weighs the same).
    double raw_mae() const {
        if (users_scored == 0) throw DataError("no test users could be scored");
        return mae_sum / static_cast<double>(users_scored);
    }
    double normalized_mae(double divisor) const { return raw_mae() / divisor; }
    std::size_t fallback_predictions() const {
        std::size_t n = 0;
        for (const auto& [depth, count] : fallback_depths)
            if (depth > 0) n += count;
        return n;
    }
};

/// Hides each rating of each test user in turn and predicts it from the
/// user's remaining ratings against the trained model. Per-user errors are
/// averaged first, then averaged across users.
inline SchemeReport all_but_one_mae(const TrainedModel& model, SchemeId scheme,
                                    const std::vector<Evaluation>& test_users) {
    if (test_users.empty()) throw DataError("empty test set");
    model.prepare(scheme);
    const ModelBundle bundle = model.bundle();

    SchemeReport report;
    report.scheme = scheme;
    std::vector<item_id> target(1);
    for (const Evaluation& u : test_users) {
        if (u.size() < 2) {
            // hiding the only rating would leave nothing to predict from
            ++report.users_skipped;
            continue;
        }
        double err_sum = 0.0;
        for (const auto& [item, actual] : u) {
            const Evaluation hidden = u.without(item);
            target[0] = item;
            const Prediction p = predict(scheme, hidden, bundle, target);
            const Prediction::Entry& e = p.at(item);
            err_sum += std::abs(e.value - actual);
            ++report.fallback_depths[e.fallback_depth];
            ++report.predictions;
        }
        report.mae_sum += err_sum / static_cast<double>(u.size());
        ++report.users_scored;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Multi-scheme comparison.
// ---------------------------------------------------------------------------

struct MAEReport {
    std::vector<SchemeReport> schemes;  // in the order they were requested
    std::vector<std::pair<SchemeId, std::string>> failures;
    double divisor = 1.0;
    SelectionOrder order = SelectionOrder::seeded_shuffle;
    std::uint64_t seed = 0;
    std::size_t train_ratings = 0;
    std::size_t test_ratings = 0;
    std::size_t train_users = 0;
    std::size_t test_users = 0;

    const SchemeReport* find(SchemeId scheme) const {
        for (const SchemeReport& r : schemes)
            if (r.scheme == scheme) return &r;
        return nullptr;
    }
};

/// Evaluates every requested scheme over the same split; a scheme that
/// throws is recorded as a failure and the rest still run.
inline MAEReport compare_schemes(const TrainedModel& model,
                                 const std::vector<Evaluation>& test_users,
                                 const std::vector<SchemeId>& schemes, double divisor = 1.0) {
    if (!(divisor > 0.0)) throw DataError("mae divisor must be > 0");
    MAEReport report;
    report.divisor = divisor;
    for (SchemeId scheme : schemes) {
        try {
            report.schemes.push_back(all_but_one_mae(model, scheme, test_users));
        } catch (const Error& e) {
            report.failures.emplace_back(scheme, e.what());
        }
    }
    return report;
}

/// Fixed-width comparison table, one row per scheme in report order.
inline void render_table(const MAEReport& report, std::ostream& out) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-22s %12s %12s %12s %12s\n", "scheme", "mae",
                  "norm-mae", "predictions", "fallbacks");
    out << line;
    for (SchemeId scheme : kReportOrder) {
        const SchemeReport* r = report.find(scheme);
        if (!r) continue;
        std::snprintf(line, sizeof(line), "%-22s %12.6f %12.6f %12zu %12zu\n",
                      scheme_name(scheme), r->raw_mae(), r->normalized_mae(report.divisor),
                      r->predictions, r->fallback_predictions());
        out << line;
    }
    for (const auto& [scheme, message] : report.failures)
        out << scheme_name(scheme) << "  FAILED: " << message << "\n";
    if (!report.schemes.empty()) {
        const SchemeReport& first = report.schemes.front();
        out << "test users scored: " << first.users_scored
            << ", skipped (single rating): " << first.users_skipped << "\n";
    }
}

/// Machine-readable dump of the same comparison.
inline void write_tsv(const MAEReport& report, std::ostream& out) {
    out << "scheme\traw_mae\tnormalized_mae\tpredictions\tusers_scored\tusers_skipped"
           "\tfallback_histogram\tdivisor\torder\tseed\ttrain_ratings\ttest_ratings\n";
    for (const SchemeReport& r : report.schemes) {
        std::string hist;
        for (const auto& [depth, count] : r.fallback_depths) {
            if (!hist.empty()) hist += ';';
            hist += std::to_string(depth) + ":" + std::to_string(count);
        }
        if (hist.empty()) hist = "-";
        out << scheme_name(r.scheme) << '\t' << format_double(r.raw_mae()) << '\t'
            << format_double(r.normalized_mae(report.divisor)) << '\t' << r.predictions << '\t'
            << r.users_scored << '\t' << r.users_skipped << '\t' << hist << '\t'
            << format_double(report.divisor) << '\t' << selection_order_name(report.order)
            << '\t' << report.seed << '\t' << report.train_ratings << '\t'
            << report.test_ratings << '\n';
    }
    for (const auto& [scheme, message] : report.failures)
        out << scheme_name(scheme) << "\tFAILED\t" << message << "\n";
}

}  // namespace slopeone

#endif  // SLOPEONE_HARNESS_HPP
