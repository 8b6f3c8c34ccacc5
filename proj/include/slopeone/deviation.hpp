#ifndef SLOPEONE_DEVIATION_HPP
#define SLOPEONE_DEVIATION_HPP

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "slopeone/core.hpp"

namespace slopeone {

/// Running sum of rating differences for one unordered item pair, together
/// with the number of users who rated both. Keeping the sum (instead of the
/// average) is what makes O(1) incremental adjustment possible; the average
/// is formed on read.
struct PairAccumulator {
    double diff_sum = 0.0;   // sum over co-raters of (u_hi - u_lo)
    std::uint32_t count = 0;

    bool operator==(const PairAccumulator& o) const {
        return diff_sum == o.diff_sum && count == o.count;
    }
};

/// Canonical key for an unordered pair of distinct items: low id in the high
/// word. The stored diff_sum is always oriented high-minus-low; reads flip
/// the sign when the caller asks for the other direction.
inline std::uint64_t pair_key(item_id a, item_id b) {
    item_id lo = a < b ? a : b;
    item_id hi = a < b ? b : a;
    return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

struct PairDeviation {
    double dev = 0.0;        // average rating advantage of j over i
    std::uint32_t count = 0;  // co-rating users backing it
};

struct PairRecord {
    item_id lo = 0;
    item_id hi = 0;
    double diff_sum = 0.0;
    std::uint32_t count = 0;

    bool operator==(const PairRecord&) const = default;
};

using PairMap = std::unordered_map<std::uint64_t, PairAccumulator>;

namespace detail {

inline void adjust_pair(PairMap& pairs, item_id a, item_id b, double hi_minus_lo_delta,
                        int count_delta) {
    PairAccumulator& acc = pairs[pair_key(a, b)];
    acc.diff_sum += hi_minus_lo_delta;
    acc.count = static_cast<std::uint32_t>(static_cast<std::int64_t>(acc.count) + count_delta);
    if (acc.count == 0) pairs.erase(pair_key(a, b));  // absent pair == count 0
}

inline PairDeviation read_pair(const PairMap& pairs, item_id j, item_id i) {
    if (j == i) return {};  // diagonal pairs are never stored
    auto it = pairs.find(pair_key(j, i));
    if (it == pairs.end() || it->second.count == 0) return {};
    double dev = it->second.diff_sum / static_cast<double>(it->second.count);
    if (j < i) dev = -dev;  // stored orientation is high-minus-low
    return {dev, it->second.count};
}

inline std::vector<PairRecord> sorted_records(const PairMap& pairs) {
    std::vector<PairRecord> records;
    records.reserve(pairs.size());
    for (const auto& [key, acc] : pairs)
        records.push_back({static_cast<item_id>(key >> 32), static_cast<item_id>(key & 0xffffffffu),
                           acc.diff_sum, acc.count});
    std::sort(records.begin(), records.end(), [](const PairRecord& a, const PairRecord& b) {
        return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi;
    });
    return records;
}

}  // namespace detail

/// The precomputed item-item deviation matrix, stored sparsely over pairs
/// that actually co-occur in some evaluation.
class DeviationStore {
public:
    static DeviationStore build(const Dataset& data) {
        DeviationStore store;
        for (const Evaluation& u : data) {
            for (auto a = u.begin(); a != u.end(); ++a)
                for (auto b = std::next(a); b != u.end(); ++b)
                    detail::adjust_pair(store.pairs_, a->first, b->first,
                                        b->second - a->second, +1);
        }
        return store;
    }

    /// dev_{j,i} with its co-rating count; (0, 0) when no user rated both.
    PairDeviation deviation(item_id j, item_id i) const {
        return detail::read_pair(pairs_, j, i);
    }

    std::size_t pair_count() const { return pairs_.size(); }

    std::vector<PairRecord> records() const { return detail::sorted_records(pairs_); }

    void restore(const PairRecord& r) { pairs_[pair_key(r.lo, r.hi)] = {r.diff_sum, r.count}; }

    bool operator==(const DeviationStore& other) const { return pairs_ == other.pairs_; }

    PairMap& raw() { return pairs_; }
    const PairMap& raw() const { return pairs_; }

private:
    PairMap pairs_;
};

/// Like/dislike deviation matrices. A user's items are split around the
/// user's own mean (strictly above = liked, strictly below = disliked; items
/// at the mean join neither). The per-user snapshot records exactly the
/// contributions currently in the maps so they can be subtracted on update.
class BipolarDeviationStore {
public:
    struct UserSnapshot {
        double mean = 0.0;
        std::vector<item_id> liked;     // ascending
        std::vector<item_id> disliked;  // ascending

        bool operator==(const UserSnapshot& o) const {
            return mean == o.mean && liked == o.liked && disliked == o.disliked;
        }
    };

    static BipolarDeviationStore build(const Dataset& data) {
        BipolarDeviationStore store;
        store.snapshots_.resize(data.user_slots());
        for (const Evaluation& u : data) {
            if (u.empty()) continue;
            store.snapshots_[u.user()] = make_snapshot(u);
            store.add_user(u, store.snapshots_[u.user()]);
        }
        return store;
    }

    PairDeviation like(item_id j, item_id i) const { return detail::read_pair(like_, j, i); }
    PairDeviation dislike(item_id j, item_id i) const { return detail::read_pair(dislike_, j, i); }

    std::size_t like_pair_count() const { return like_.size(); }
    std::size_t dislike_pair_count() const { return dislike_.size(); }

    std::vector<PairRecord> like_records() const { return detail::sorted_records(like_); }
    std::vector<PairRecord> dislike_records() const { return detail::sorted_records(dislike_); }

    void restore_like(const PairRecord& r) { like_[pair_key(r.lo, r.hi)] = {r.diff_sum, r.count}; }
    void restore_dislike(const PairRecord& r) {
        dislike_[pair_key(r.lo, r.hi)] = {r.diff_sum, r.count};
    }

    /// Recompute every per-user snapshot from the dataset (used after loading
    /// serialized accumulators, which carry no snapshots).
    void rebuild_snapshots(const Dataset& data) {
        snapshots_.assign(data.user_slots(), {});
        for (const Evaluation& u : data)
            if (!u.empty()) snapshots_[u.user()] = make_snapshot(u);
    }

    const UserSnapshot& snapshot(user_id user) const {
        if (user >= snapshots_.size()) throw InternalError("no snapshot for user");
        return snapshots_[user];
    }

    bool operator==(const BipolarDeviationStore& other) const {
        return like_ == other.like_ && dislike_ == other.dislike_ &&
               snapshots_ == other.snapshots_;
    }

    /// Membership split of one evaluation around its own mean.
    static UserSnapshot make_snapshot(const Evaluation& u) {
        UserSnapshot snap;
        snap.mean = u.mean();
        for (const auto& [item, value] : u) {
            if (value > snap.mean)
                snap.liked.push_back(item);
            else if (value < snap.mean)
                snap.disliked.push_back(item);
        }
        return snap;
    }

private:
    friend struct StoreUpdater;

    std::size_t add_user(const Evaluation& u, const UserSnapshot& snap) {
        return apply_user(u, snap, +1);
    }
    std::size_t subtract_user(const Evaluation& u, const UserSnapshot& snap) {
        return apply_user(u, snap, -1);
    }

    std::size_t apply_user(const Evaluation& u, const UserSnapshot& snap, int sign) {
        std::size_t touched = 0;
        touched += apply_polar(like_, u, snap.liked, sign);
        touched += apply_polar(dislike_, u, snap.disliked, sign);
        return touched;
    }

    static std::size_t apply_polar(PairMap& pairs, const Evaluation& u,
                                   const std::vector<item_id>& members, int sign) {
        std::size_t touched = 0;
        for (std::size_t a = 0; a < members.size(); ++a) {
            const double va = *u.find(members[a]);
            for (std::size_t b = a + 1; b < members.size(); ++b) {
                const double vb = *u.find(members[b]);
                detail::adjust_pair(pairs, members[a], members[b], sign * (vb - va), sign);
                ++touched;
            }
        }
        return touched;
    }

    PairMap like_;
    PairMap dislike_;
    std::vector<UserSnapshot> snapshots_;
};

/// Convenience: both stores from one pass over the training set.
inline std::pair<DeviationStore, BipolarDeviationStore> build_stores(const Dataset& data) {
    return {DeviationStore::build(data), BipolarDeviationStore::build(data)};
}

enum class ChangeKind { add, remove, update };

struct RatingChange {
    ChangeKind kind;
    double value = 0.0;  // ignored for remove

    static RatingChange add(double v) { return {ChangeKind::add, v}; }
    static RatingChange remove() { return {ChangeKind::remove, 0.0}; }
    static RatingChange update(double v) { return {ChangeKind::update, v}; }
};

struct UpdateStats {
    std::size_t plain_adjusted = 0;    // plain-store accumulator adjustments
    std::size_t bipolar_adjusted = 0;  // like+dislike accumulator adjustments

    std::size_t total() const { return plain_adjusted + bipolar_adjusted; }
};

struct StoreUpdater {
    /// Apply one rating change to the dataset and keep both stores exact.
    ///
    /// Plain store: each pair (item, k) for the user's other items k moves by
    /// the delta of the (u_item - u_k) contribution — O(|S(u)|).
    ///
    /// Bipolar store: the user's old contributions are subtracted wholesale
    /// (per the stored snapshot), the mean and polar sets recomputed, and the
    /// new contributions added. A rating change moves the mean and can flip
    /// the polarity of every item of that user, so per-pair deltas would be
    /// wrong.
    static UpdateStats apply(DeviationStore& plain, BipolarDeviationStore& bipolar, Dataset& data,
                             user_id user, item_id item, const RatingChange& change) {
        UpdateStats stats;
        const bool known_user = user < data.user_slots() && data.has_user(user);

        double old_value = 0.0;
        bool had_rating = false;
        if (known_user) {
            if (const double* v = data.evaluation(user).find(item)) {
                old_value = *v;
                had_rating = true;
            }
        }

        switch (change.kind) {
            case ChangeKind::add:
                if (had_rating) throw DataError("duplicate rating");
                if (!data.scale().contains(change.value))
                    throw DataError("rating " + std::to_string(change.value) + " outside scale");
                break;
            case ChangeKind::remove:
            case ChangeKind::update:
                if (!known_user) throw DataError("unknown user");
                if (!had_rating) throw DataError("user has no rating for item");
                if (change.kind == ChangeKind::update && !data.scale().contains(change.value))
                    throw DataError("rating " + std::to_string(change.value) + " outside scale");
                break;
        }

        // An update to the identical value changes nothing anywhere.
        if (change.kind == ChangeKind::update && change.value == old_value) return stats;

        // Plain-store deltas against the pre-mutation evaluation.
        if (known_user) {
            const Evaluation& before = data.evaluation(user);
            switch (change.kind) {
                case ChangeKind::add:
                    stats.plain_adjusted +=
                        adjust_against(plain, before, item, change.value, +1);
                    break;
                case ChangeKind::remove:
                    stats.plain_adjusted += adjust_against(plain, before, item, old_value, -1);
                    break;
                case ChangeKind::update: {
                    const double delta = change.value - old_value;
                    for (const auto& [k, w] : before) {
                        (void)w;
                        if (k == item) continue;
                        detail::adjust_pair(plain.raw(), item, k,
                                            item > k ? delta : -delta, 0);
                        ++stats.plain_adjusted;
                    }
                    break;
                }
            }
        }

        // Bipolar resubscription: subtract old, mutate, re-add.
        if (known_user)
            stats.bipolar_adjusted +=
                bipolar.subtract_user(data.evaluation(user), bipolar.snapshot(user));

        switch (change.kind) {
            case ChangeKind::add:
                data.set_rating(user, item, change.value);
                break;
            case ChangeKind::remove:
                data.remove_rating(user, item);
                break;
            case ChangeKind::update:
                data.set_rating(user, item, change.value);
                break;
        }

        if (user >= bipolar.snapshots_.size()) bipolar.snapshots_.resize(data.user_slots());
        if (data.has_user(user)) {
            bipolar.snapshots_[user] = BipolarDeviationStore::make_snapshot(data.evaluation(user));
            stats.bipolar_adjusted +=
                bipolar.add_user(data.evaluation(user), bipolar.snapshots_[user]);
        } else {
            bipolar.snapshots_[user] = {};  // last rating removed
        }

        return stats;
    }

private:
    static std::size_t adjust_against(DeviationStore& plain, const Evaluation& others,
                                      item_id item, double value, int sign) {
        std::size_t touched = 0;
        for (const auto& [k, w] : others) {
            if (k == item) continue;
            const double hi_minus_lo = item > k ? value - w : w - value;
            detail::adjust_pair(plain.raw(), item, k, sign * hi_minus_lo, sign);
            ++touched;
        }
        return touched;
    }
};

inline UpdateStats apply_rating_change(DeviationStore& plain, BipolarDeviationStore& bipolar,
                                       Dataset& data, user_id user, item_id item,
                                       const RatingChange& change) {
    return StoreUpdater::apply(plain, bipolar, data, user, item, change);
}

}  // namespace slopeone

#endif  // SLOPEONE_DEVIATION_HPP
