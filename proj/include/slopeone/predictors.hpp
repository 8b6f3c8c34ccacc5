#ifndef SLOPEONE_PREDICTORS_HPP
#define SLOPEONE_PREDICTORS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slopeone/core.hpp"
#include "slopeone/deviation.hpp"

namespace slopeone {

inline constexpr std::array<SchemeId, 7> kAllSchemes = {
    SchemeId::per_user_average,    SchemeId::bias_from_mean, SchemeId::adjusted_cosine_item,
    SchemeId::pearson,             SchemeId::slope_one,      SchemeId::weighted_slope_one,
    SchemeId::bipolar_slope_one,
};

/// Row order used by comparison reports.
inline constexpr std::array<SchemeId, 7> kReportOrder = {
    SchemeId::bipolar_slope_one, SchemeId::weighted_slope_one,   SchemeId::slope_one,
    SchemeId::bias_from_mean,    SchemeId::adjusted_cosine_item, SchemeId::per_user_average,
    SchemeId::pearson,
};

inline const char* scheme_name(SchemeId scheme) {
    switch (scheme) {
        case SchemeId::per_user_average: return "per-user-average";
        case SchemeId::bias_from_mean: return "bias-from-mean";
        case SchemeId::adjusted_cosine_item: return "adjusted-cosine-item";
        case SchemeId::pearson: return "pearson";
        case SchemeId::slope_one: return "slope-one";
        case SchemeId::weighted_slope_one: return "weighted-slope-one";
        case SchemeId::bipolar_slope_one: return "bipolar-slope-one";
    }
    throw InternalError("unknown scheme id");
}

inline std::optional<SchemeId> scheme_from_name(std::string_view name) {
    for (SchemeId s : kAllSchemes)
        if (name == scheme_name(s)) return s;
    return std::nullopt;
}

struct PearsonParams {
    double rho = 2.5;  // Case Amplification power

    void validate() const {
        if (!(rho > 0.0)) throw DataError("case amplification power must be > 0");
    }
};

/// Sign-preserving amplification: corr * |corr|^(rho-1).
inline double case_amplify(double corr, double rho) {
    if (corr == 0.0) return 0.0;
    return corr * std::pow(std::abs(corr), rho - 1.0);
}

/// Pearson correlation over the co-rated items only, centered with each
/// user's full-evaluation mean. Degenerate cases (no overlap, zero centered
/// norm on either side) give 0, so the neighbor simply contributes nothing.
inline double pearson_correlation(const Evaluation& u, const Evaluation& w) {
    if (u.empty() || w.empty()) return 0.0;
    const double u_mean = u.mean();
    const double w_mean = w.mean();
    double num = 0.0, nu = 0.0, nw = 0.0;
    // Walk the smaller evaluation, probe the larger; overlap is visited in
    // ascending item order either way.
    const Evaluation& small = u.size() <= w.size() ? u : w;
    const Evaluation& large = u.size() <= w.size() ? w : u;
    const double small_mean = u.size() <= w.size() ? u_mean : w_mean;
    const double large_mean = u.size() <= w.size() ? w_mean : u_mean;
    for (const auto& [item, sv] : small) {
        const double* lv = large.find(item);
        if (!lv) continue;
        const double ds = sv - small_mean;
        const double dl = *lv - large_mean;
        num += ds * dl;
        nu += ds * ds;
        nw += dl * dl;
    }
    if (nu <= 0.0 || nw <= 0.0) return 0.0;
    return num / std::sqrt(nu * nw);
}

/// Least-squares line predicting ratings of `target` from ratings of
/// `source` over their co-raters. With no co-raters or zero variance in the
/// source ratings the fit degenerates to the flat line through the mean of
/// the target ratings (0 when there are none).
struct PairRegression {
    double alpha = 0.0;
    double beta = 0.0;
    bool degenerate = false;
    std::uint32_t support = 0;

    double predict(double source_rating) const { return alpha * source_rating + beta; }
};

namespace detail {

inline PairRegression solve_regression(double n, double sx, double sy, double sxx, double sxy) {
    PairRegression fit;
    fit.support = static_cast<std::uint32_t>(n);
    if (n == 0.0) {
        fit.degenerate = true;
        return fit;
    }
    const double denom = n * sxx - sx * sx;
    // denom is n^2 * var(x); treat float dust as zero variance.
    if (!(denom > 1e-12 * std::max(1.0, n * sxx))) {
        fit.alpha = 0.0;
        fit.beta = sy / n;
        fit.degenerate = true;
        return fit;
    }
    fit.alpha = (n * sxy - sx * sy) / denom;
    fit.beta = (sy - fit.alpha * sx) / n;
    return fit;
}

}  // namespace detail

inline PairRegression fit_pair_regression(const Dataset& data, item_id target, item_id source) {
    const auto& raters_t = data.users_with_item(target);
    const auto& raters_s = data.users_with_item(source);
    double n = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    auto it = raters_t.begin();
    auto jt = raters_s.begin();
    while (it != raters_t.end() && jt != raters_s.end()) {
        if (*it < *jt) {
            ++it;
        } else if (*jt < *it) {
            ++jt;
        } else {
            const Evaluation& u = data.evaluation(*it);
            const double x = *u.find(source);
            const double y = *u.find(target);
            n += 1.0;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++it;
            ++jt;
        }
    }
    return detail::solve_regression(n, sx, sy, sxx, sxy);
}

/// Adjusted-cosine similarities plus the per-orientation regression lines for
/// every co-occurring item pair, fitted eagerly in one pass over the
/// training set.
class ItemItemModel {
public:
    struct Predictor {
        double sim = 0.0;  // symmetric, in [-1, 1]
        PairRegression regression;
    };

    static ItemItemModel fit(const Dataset& data) {
        struct Acc {
            double n = 0.0;
            double s_lo = 0.0, s_hi = 0.0;
            double s_lolo = 0.0, s_hihi = 0.0, s_lohi = 0.0;
            double c_lolo = 0.0, c_hihi = 0.0, c_lohi = 0.0;
        };
        std::unordered_map<std::uint64_t, Acc> accs;
        for (const Evaluation& u : data) {
            if (u.empty()) continue;
            const double mean = u.mean();
            for (auto a = u.begin(); a != u.end(); ++a) {
                const double ca = a->second - mean;
                for (auto b = std::next(a); b != u.end(); ++b) {
                    const double cb = b->second - mean;
                    Acc& acc = accs[pair_key(a->first, b->first)];
                    acc.n += 1.0;
                    acc.s_lo += a->second;
                    acc.s_hi += b->second;
                    acc.s_lolo += a->second * a->second;
                    acc.s_hihi += b->second * b->second;
                    acc.s_lohi += a->second * b->second;
                    acc.c_lolo += ca * ca;
                    acc.c_hihi += cb * cb;
                    acc.c_lohi += ca * cb;
                }
            }
        }

        ItemItemModel model;
        model.pairs_.reserve(accs.size());
        for (const auto& [key, acc] : accs) {
            Entry e;
            const double norm = acc.c_lolo * acc.c_hihi;
            e.sim = norm > 0.0 ? acc.c_lohi / std::sqrt(norm) : 0.0;
            // predict lo from hi: x = hi ratings, y = lo ratings
            e.lo_from_hi =
                detail::solve_regression(acc.n, acc.s_hi, acc.s_lo, acc.s_hihi, acc.s_lohi);
            e.hi_from_lo =
                detail::solve_regression(acc.n, acc.s_lo, acc.s_hi, acc.s_lolo, acc.s_lohi);
            model.pairs_.emplace(key, e);
        }
        return model;
    }

    /// sim_{target,source} with the regression predicting target from source;
    /// nullopt when the items never co-occur (sim would be 0).
    std::optional<Predictor> predictor(item_id target, item_id source) const {
        if (target == source) return std::nullopt;
        auto it = pairs_.find(pair_key(target, source));
        if (it == pairs_.end()) return std::nullopt;
        const Entry& e = it->second;
        return Predictor{e.sim, target < source ? e.lo_from_hi : e.hi_from_lo};
    }

    double similarity(item_id i, item_id j) const {
        auto p = predictor(i, j);
        return p ? p->sim : 0.0;
    }

    std::size_t pair_count() const { return pairs_.size(); }

private:
    struct Entry {
        double sim = 0.0;
        PairRegression lo_from_hi;
        PairRegression hi_from_lo;
    };
    std::unordered_map<std::uint64_t, Entry> pairs_;
};

/// Per-item sum of (v_i - vbar) over the item's raters, precomputed so the
/// bias-from-mean scheme is O(1) per query item.
class ItemBiasTable {
public:
    static ItemBiasTable fit(const Dataset& data) {
        ItemBiasTable table;
        table.cells_.resize(data.item_slots());
        for (const Evaluation& v : data) {
            if (v.empty()) continue;
            const double v_mean = v.mean();
            for (const auto& [item, value] : v) {
                table.cells_[item].dev_sum += value - v_mean;
                table.cells_[item].count += 1;
            }
        }
        return table;
    }

    /// Average deviation from the rater's own mean; nullopt when unrated.
    std::optional<double> mean_offset(item_id item) const {
        if (item >= cells_.size() || cells_[item].count == 0) return std::nullopt;
        return cells_[item].dev_sum / static_cast<double>(cells_[item].count);
    }

private:
    struct Cell {
        double dev_sum = 0.0;
        std::uint32_t count = 0;
    };
    std::vector<Cell> cells_;
};

/// Canonical user means for the training set, indexed by user id (NaN for
/// users without ratings).
inline std::vector<double> user_means(const Dataset& data) {
    std::vector<double> means(data.user_slots(), std::numeric_limits<double>::quiet_NaN());
    for (const Evaluation& v : data)
        if (!v.empty()) means[v.user()] = v.mean();
    return means;
}

// ---------------------------------------------------------------------------
// Prediction schemes. All of them clamp to the scale and tag each entry with
// the scheme that actually produced the value plus the fallback depth walked
// to reach it.
// ---------------------------------------------------------------------------

namespace detail {

inline void emit(Prediction& out, item_id item, double value, const RatingScale& scale,
                 SchemeId produced_by, int depth) {
    out.entries[item] = {scale.clamp(value), produced_by, depth};
}

}  // namespace detail

/// P(u) = ubar for every requested item.
inline Prediction predict_per_user_average(const Evaluation& u, const std::vector<item_id>& items,
                                           const RatingScale& scale) {
    const double mean = u.mean();
    Prediction out;
    for (item_id item : items)
        detail::emit(out, item, mean, scale, SchemeId::per_user_average, 0);
    return out;
}

/// ubar plus the item's average deviation from each rater's own mean.
/// Items nobody rated fall back to ubar at depth 1.
inline Prediction predict_bias_from_mean(const Evaluation& u, const Dataset& data,
                                         const std::vector<item_id>& items,
                                         const ItemBiasTable* table = nullptr) {
    const double mean = u.mean();
    const RatingScale& scale = data.scale();
    Prediction out;
    for (item_id item : items) {
        std::optional<double> offset;
        if (table) {
            offset = table->mean_offset(item);
        } else {
            const auto& raters = data.users_with_item(item);
            if (!raters.empty()) {
                double sum = 0.0;
                for (user_id uid : raters) {
                    const Evaluation& v = data.evaluation(uid);
                    sum += *v.find(item) - v.mean();
                }
                offset = sum / static_cast<double>(raters.size());
            }
        }
        if (offset)
            detail::emit(out, item, mean + *offset, scale, SchemeId::bias_from_mean, 0);
        else
            detail::emit(out, item, mean, scale, SchemeId::per_user_average, 1);
    }
    return out;
}

/// Similarity-weighted average of the per-pair regression predictions.
/// Chain: adjusted cosine -> bias from mean -> ubar.
inline Prediction predict_adjusted_cosine(const Evaluation& u, const Dataset& data,
                                          const ItemItemModel& model,
                                          const std::vector<item_id>& items,
                                          const ItemBiasTable* bias = nullptr) {
    const double mean = u.mean();
    const RatingScale& scale = data.scale();
    Prediction out;
    for (item_id target : items) {
        double num = 0.0, den = 0.0;
        for (const auto& [source, rating] : u) {
            auto p = model.predictor(target, source);
            if (!p || p->sim == 0.0) continue;
            const double weight = std::abs(p->sim);
            num += weight * p->regression.predict(rating);
            den += weight;
        }
        if (den > 0.0) {
            detail::emit(out, target, num / den, scale, SchemeId::adjusted_cosine_item, 0);
            continue;
        }
        Prediction fb = predict_bias_from_mean(u, data, {target}, bias);
        const Prediction::Entry& e = fb.at(target);
        out.entries[target] = {e.value, e.produced_by, e.fallback_depth + 1};
    }
    return out;
}

/// Memory-based reference scheme: a case-amplified correlation-weighted sum
/// over every training user who rated the item.
inline Prediction predict_pearson(const Evaluation& u, const Dataset& data,
                                  const PearsonParams& params, const std::vector<item_id>& items,
                                  const std::vector<double>* train_means = nullptr) {
    params.validate();
    const double u_mean = u.mean();
    const RatingScale& scale = data.scale();

    // Direct-address copy of the query ratings for O(1) membership probes.
    std::vector<double> u_values(data.item_slots(), std::numeric_limits<double>::quiet_NaN());
    for (const auto& [item, value] : u)
        if (item < u_values.size()) u_values[item] = value;

    std::vector<double> local_means;
    if (!train_means) {
        local_means = user_means(data);
        train_means = &local_means;
    }

    Prediction out;
    for (item_id target : items) {
        double num = 0.0, den = 0.0;
        for (user_id vid : data.users_with_item(target)) {
            const Evaluation& v = data.evaluation(vid);
            const double v_mean = (*train_means)[vid];
            // Correlation over the overlap, walking v's ratings in item order.
            double cnum = 0.0, cnu = 0.0, cnv = 0.0;
            for (const auto& [item, value] : v) {
                if (item >= u_values.size() || std::isnan(u_values[item])) continue;
                const double du = u_values[item] - u_mean;
                const double dv = value - v_mean;
                cnum += du * dv;
                cnu += du * du;
                cnv += dv * dv;
            }
            const double corr = (cnu > 0.0 && cnv > 0.0) ? cnum / std::sqrt(cnu * cnv) : 0.0;
            const double gamma = case_amplify(corr, params.rho);
            num += gamma * (*v.find(target) - v_mean);
            den += std::abs(gamma);
        }
        if (den > 0.0)
            detail::emit(out, target, u_mean + num / den, scale, SchemeId::pearson, 0);
        else
            detail::emit(out, target, u_mean, scale, SchemeId::per_user_average, 1);
    }
    return out;
}

/// Simplified slope one: ubar plus the mean deviation over the relevant
/// items R_j (rated by u, co-rated with j at least once).
inline Prediction predict_slope_one(const Evaluation& u, const DeviationStore& store,
                                    const std::vector<item_id>& items, const RatingScale& scale) {
    const double mean = u.mean();
    Prediction out;
    for (item_id target : items) {
        double dev_sum = 0.0;
        std::uint32_t relevant = 0;
        for (const auto& [item, rating] : u) {
            (void)rating;
            if (item == target) continue;
            const PairDeviation d = store.deviation(target, item);
            if (d.count == 0) continue;
            dev_sum += d.dev;
            ++relevant;
        }
        if (relevant > 0)
            detail::emit(out, target, mean + dev_sum / static_cast<double>(relevant), scale,
                         SchemeId::slope_one, 0);
        else
            detail::emit(out, target, mean, scale, SchemeId::per_user_average, 1);
    }
    return out;
}

/// Weighted slope one: the per-pair predictions dev_{j,i} + u_i averaged with
/// co-rating counts as weights.
inline Prediction predict_weighted_slope_one(const Evaluation& u, const DeviationStore& store,
                                             const std::vector<item_id>& items,
                                             const RatingScale& scale) {
    const double mean = u.mean();
    Prediction out;
    for (item_id target : items) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& [item, rating] : u) {
            if (item == target) continue;
            const PairDeviation d = store.deviation(target, item);
            if (d.count == 0) continue;
            num += (d.dev + rating) * static_cast<double>(d.count);
            den += static_cast<double>(d.count);
        }
        if (den > 0.0)
            detail::emit(out, target, num / den, scale, SchemeId::weighted_slope_one, 0);
        else
            detail::emit(out, target, mean, scale, SchemeId::per_user_average, 1);
    }
    return out;
}

/// Bi-polar slope one: weighted slope one restricted to like-like and
/// dislike-dislike pairs, with the query user's items split around their own
/// mean. Chain: bipolar -> weighted slope one -> ubar.
inline Prediction predict_bipolar_slope_one(const Evaluation& u,
                                            const BipolarDeviationStore& bipolar,
                                            const DeviationStore& plain,
                                            const std::vector<item_id>& items,
                                            const RatingScale& scale) {
    const double mean = u.mean();
    Prediction out;
    for (item_id target : items) {
        double num = 0.0;
        double den = 0.0;
        for (const auto& [item, rating] : u) {
            if (item == target) continue;
            if (rating > mean) {
                const PairDeviation d = bipolar.like(target, item);
                if (d.count == 0) continue;
                num += (d.dev + rating) * static_cast<double>(d.count);
                den += static_cast<double>(d.count);
            } else if (rating < mean) {
                const PairDeviation d = bipolar.dislike(target, item);
                if (d.count == 0) continue;
                num += (d.dev + rating) * static_cast<double>(d.count);
                den += static_cast<double>(d.count);
            }
            // items at the mean are neither liked nor disliked
        }
        if (den > 0.0) {
            detail::emit(out, target, num / den, scale, SchemeId::bipolar_slope_one, 0);
            continue;
        }
        Prediction fb = predict_weighted_slope_one(u, plain, {target}, scale);
        const Prediction::Entry& e = fb.at(target);
        out.entries[target] = {e.value, e.produced_by, e.fallback_depth + 1};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniform dispatch over a trained-model bundle.
// ---------------------------------------------------------------------------

/// Non-owning view of whatever model components a caller has on hand.
struct ModelBundle {
    const RatingScale* scale = nullptr;
    const Dataset* dataset = nullptr;
    const DeviationStore* plain = nullptr;
    const BipolarDeviationStore* bipolar = nullptr;
    const ItemItemModel* item_model = nullptr;
    const ItemBiasTable* bias_table = nullptr;          // optional fast path
    const std::vector<double>* train_user_means = nullptr;  // optional fast path
    PearsonParams pearson;
};

namespace detail {

inline void require(const void* component, SchemeId scheme, const char* what) {
    if (!component)
        throw DataError(std::string("scheme ") + scheme_name(scheme) + " requires " + what);
}

}  // namespace detail

inline Prediction predict(SchemeId scheme, const Evaluation& u, const ModelBundle& model,
                          const std::vector<item_id>& items) {
    detail::require(model.scale, scheme, "a rating scale");
    switch (scheme) {
        case SchemeId::per_user_average:
            return predict_per_user_average(u, items, *model.scale);
        case SchemeId::bias_from_mean:
            detail::require(model.dataset, scheme, "the training dataset");
            return predict_bias_from_mean(u, *model.dataset, items, model.bias_table);
        case SchemeId::adjusted_cosine_item:
            detail::require(model.dataset, scheme, "the training dataset");
            detail::require(model.item_model, scheme, "a fitted item-item model");
            return predict_adjusted_cosine(u, *model.dataset, *model.item_model, items,
                                           model.bias_table);
        case SchemeId::pearson:
            detail::require(model.dataset, scheme, "the training dataset");
            return predict_pearson(u, *model.dataset, model.pearson, items,
                                   model.train_user_means);
        case SchemeId::slope_one:
            detail::require(model.plain, scheme, "a deviation store");
            return predict_slope_one(u, *model.plain, items, *model.scale);
        case SchemeId::weighted_slope_one:
            detail::require(model.plain, scheme, "a deviation store");
            return predict_weighted_slope_one(u, *model.plain, items, *model.scale);
        case SchemeId::bipolar_slope_one:
            detail::require(model.bipolar, scheme, "a bipolar deviation store");
            detail::require(model.plain, scheme, "a deviation store");
            return predict_bipolar_slope_one(u, *model.bipolar, *model.plain, items,
                                             *model.scale);
    }
    throw InternalError("unknown scheme id");
}

/// Owning aggregate of everything trainable from one dataset. The expensive
/// optional parts (item-item model, bias table, user means) are fitted on
/// demand and cached.
class TrainedModel {
public:
    TrainedModel() = default;

    static TrainedModel train(Dataset dataset, Interner users, Interner items) {
        TrainedModel m;
        m.dataset_ = std::move(dataset);
        m.users_ = std::move(users);
        m.items_ = std::move(items);
        auto stores = build_stores(m.dataset_);
        m.plain_ = std::move(stores.first);
        m.bipolar_ = std::move(stores.second);
        return m;
    }

    static TrainedModel assemble(Dataset dataset, Interner users, Interner items,
                                 DeviationStore plain, BipolarDeviationStore bipolar) {
        TrainedModel m;
        m.dataset_ = std::move(dataset);
        m.users_ = std::move(users);
        m.items_ = std::move(items);
        m.plain_ = std::move(plain);
        m.bipolar_ = std::move(bipolar);
        m.bipolar_.rebuild_snapshots(m.dataset_);
        return m;
    }

    const Dataset& dataset() const { return dataset_; }
    const RatingScale& scale() const { return dataset_.scale(); }
    const Interner& users() const { return users_; }
    const Interner& items() const { return items_; }
    const DeviationStore& plain() const { return plain_; }
    const BipolarDeviationStore& bipolar() const { return bipolar_; }

    PearsonParams& pearson_params() { return pearson_; }
    const PearsonParams& pearson_params() const { return pearson_; }

    void ensure_item_model() const {
        if (!item_model_) item_model_ = ItemItemModel::fit(dataset_);
    }
    void ensure_bias_table() const {
        if (!bias_table_) bias_table_ = ItemBiasTable::fit(dataset_);
    }
    void ensure_user_means() const {
        if (!means_) means_ = user_means(dataset_);
    }

    /// Fit whatever `scheme` needs beyond the deviation stores.
    void prepare(SchemeId scheme) const {
        switch (scheme) {
            case SchemeId::bias_from_mean:
                ensure_bias_table();
                break;
            case SchemeId::adjusted_cosine_item:
                ensure_item_model();
                ensure_bias_table();
                break;
            case SchemeId::pearson:
                ensure_user_means();
                break;
            default:
                break;
        }
    }

    ModelBundle bundle() const {
        ModelBundle b;
        b.scale = &dataset_.scale();
        b.dataset = &dataset_;
        b.plain = &plain_;
        b.bipolar = &bipolar_;
        b.item_model = item_model_ ? &*item_model_ : nullptr;
        b.bias_table = bias_table_ ? &*bias_table_ : nullptr;
        b.train_user_means = means_ ? &*means_ : nullptr;
        b.pearson = pearson_;
        return b;
    }

    /// Live update: keeps dataset and both stores exact, drops caches that
    /// depend on the mutated data.
    UpdateStats apply(user_id user, item_id item, const RatingChange& change) {
        UpdateStats stats = apply_rating_change(plain_, bipolar_, dataset_, user, item, change);
        item_model_.reset();
        bias_table_.reset();
        means_.reset();
        return stats;
    }

    Interner& mutable_users() { return users_; }
    Interner& mutable_items() { return items_; }

private:
    Dataset dataset_;
    Interner users_;
    Interner items_;
    DeviationStore plain_;
    BipolarDeviationStore bipolar_;
    PearsonParams pearson_;
    mutable std::optional<ItemItemModel> item_model_;
    mutable std::optional<ItemBiasTable> bias_table_;
    mutable std::optional<std::vector<double>> means_;
};

}  // namespace slopeone

#endif  // SLOPEONE_PREDICTORS_HPP
