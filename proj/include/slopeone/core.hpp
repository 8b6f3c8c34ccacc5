#ifndef SLOPEONE_CORE_HPP
#define SLOPEONE_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace slopeone {

using user_id = std::uint32_t;
using item_id = std::uint32_t;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad input: malformed files, out-of-range ratings, unusable queries.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// A broken internal invariant; callers cannot recover.
class InternalError : public Error {
public:
    explicit InternalError(const std::string& msg) : Error(msg) {}
};

/// Legal rating range and increment for a corpus. Governs clamping.
struct RatingScale {
    double min = 1.0;
    double max = 5.0;
    double step = 1.0;

    RatingScale() = default;
    RatingScale(double min_, double max_, double step_) : min(min_), max(max_), step(step_) {
        validate();
    }

    void validate() const {
        if (!std::isfinite(min) || !std::isfinite(max) || !std::isfinite(step))
            throw DataError("rating scale values must be finite");
        if (!(min < max))
            throw DataError("rating scale requires min < max");
        if (!(step > 0.0))
            throw DataError("rating scale requires step > 0");
        const double span = (max - min) / step;
        if (std::abs(span - std::round(span)) > 1e-9)
            throw DataError("rating scale span is not a multiple of step");
    }

    bool contains(double v) const { return v >= min && v <= max; }

    double midpoint() const { return min + (max - min) / 2.0; }

    /// Range correction only; the result is not snapped to the step grid.
    double clamp(double v) const {
        if (!std::isfinite(v)) throw DataError("non-finite prediction");
        return std::min(std::max(v, min), max);
    }
};

inline double clamp(double v, const RatingScale& scale) { return scale.clamp(v); }

/// One user's incomplete rating array. Ratings are kept sorted by item so
/// that iteration order (and therefore every accumulated sum) is deterministic.
class Evaluation {
public:
    using entry = std::pair<item_id, double>;
    using const_iterator = std::vector<entry>::const_iterator;

    Evaluation() = default;
    explicit Evaluation(user_id user) : user_(user) {}
    Evaluation(user_id user, std::initializer_list<entry> ratings) : user_(user) {
        for (const auto& [item, value] : ratings) set(item, value);
    }

    user_id user() const { return user_; }
    std::size_t size() const { return ratings_.size(); }
    bool empty() const { return ratings_.empty(); }

    const_iterator begin() const { return ratings_.begin(); }
    const_iterator end() const { return ratings_.end(); }

    bool contains(item_id item) const { return find(item) != nullptr; }

    const double* find(item_id item) const {
        auto it = lower_bound(item);
        if (it != ratings_.end() && it->first == item) return &it->second;
        return nullptr;
    }

    /// Insert or replace; returns the previous value when one existed.
    std::optional<double> set(item_id item, double value) {
        auto it = mutable_lower_bound(item);
        if (it != ratings_.end() && it->first == item) {
            double old = it->second;
            it->second = value;
            return old;
        }
        ratings_.insert(it, {item, value});
        return std::nullopt;
    }

    /// Returns the removed value, or nullopt when the item was not rated.
    std::optional<double> erase(item_id item) {
        auto it = mutable_lower_bound(item);
        if (it == ratings_.end() || it->first != item) return std::nullopt;
        double old = it->second;
        ratings_.erase(it);
        return old;
    }

    /// ubar, summed in ascending item order. Every module that needs a user
    /// mean must go through here so that means compare bit-identically.
    double mean() const {
        if (ratings_.empty()) throw DataError("empty evaluation");
        double sum = 0.0;
        for (const auto& [item, value] : ratings_) {
            (void)item;
            sum += value;
        }
        return sum / static_cast<double>(ratings_.size());
    }

    /// Copy with one rating hidden (the all-but-one query u^(i)).
    Evaluation without(item_id item) const {
        Evaluation copy = *this;
        copy.erase(item);
        return copy;
    }

    bool operator==(const Evaluation& other) const {
        return user_ == other.user_ && ratings_ == other.ratings_;
    }

private:
    const_iterator lower_bound(item_id item) const {
        return std::lower_bound(ratings_.begin(), ratings_.end(), item,
                                [](const entry& e, item_id k) { return e.first < k; });
    }
    std::vector<entry>::iterator mutable_lower_bound(item_id item) {
        return std::lower_bound(ratings_.begin(), ratings_.end(), item,
                                [](const entry& e, item_id k) { return e.first < k; });
    }

    user_id user_ = 0;
    std::vector<entry> ratings_;
};

inline double evaluation_mean(const Evaluation& u) { return u.mean(); }

/// Raw identifier dictionary. Handles are dense and assigned in
/// first-appearance order, so re-reading the same input reproduces them.
class Interner {
public:
    std::uint32_t intern(std::string_view raw) {
        auto it = index_.find(std::string(raw));
        if (it != index_.end()) return it->second;
        std::uint32_t id = static_cast<std::uint32_t>(names_.size());
        names_.emplace_back(raw);
        index_.emplace(names_.back(), id);
        return id;
    }

    std::optional<std::uint32_t> lookup(std::string_view raw) const {
        auto it = index_.find(std::string(raw));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(std::uint32_t id) const {
        if (id >= names_.size()) throw InternalError("interned id out of range");
        return names_[id];
    }

    std::size_t size() const { return names_.size(); }

    bool operator==(const Interner& other) const { return names_ == other.names_; }

private:
    std::unordered_map<std::string, std::uint32_t> index_;
    std::vector<std::string> names_;
};

/// The training set: one evaluation per user plus the item -> raters index.
/// Users and items are dense interned handles; a user whose last rating was
/// removed keeps its slot (and dictionary entry) but drops out of iteration.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(RatingScale scale) : scale_(scale) { scale_.validate(); }

    const RatingScale& scale() const { return scale_; }

    void ensure_user(user_id user) {
        if (user >= users_.size()) {
            std::size_t old = users_.size();
            users_.resize(user + 1);
            for (std::size_t uid = old; uid < users_.size(); ++uid)
                users_[uid] = Evaluation(static_cast<user_id>(uid));
        }
    }

    void ensure_item(item_id item) {
        if (item >= item_users_.size()) item_users_.resize(item + 1);
    }

    /// Insert or replace one rating, keeping the item index exact.
    /// Returns the previous value when the user had already rated the item.
    std::optional<double> set_rating(user_id user, item_id item, double value) {
        if (!scale_.contains(value))
            throw DataError("rating " + std::to_string(value) + " outside scale");
        ensure_user(user);
        ensure_item(item);
        std::optional<double> old = users_[user].set(item, value);
        if (!old) {
            auto& raters = item_users_[item];
            raters.insert(std::upper_bound(raters.begin(), raters.end(), user), user);
            ++rating_count_;
        }
        return old;
    }

    /// Remove one rating; errors when it does not exist.
    double remove_rating(user_id user, item_id item) {
        if (user >= users_.size()) throw DataError("unknown user");
        std::optional<double> old = users_[user].erase(item);
        if (!old) throw DataError("user has no rating for item");
        auto& raters = item_users_[item];
        raters.erase(std::lower_bound(raters.begin(), raters.end(), user));
        --rating_count_;
        return *old;
    }

    bool has_user(user_id user) const { return user < users_.size() && !users_[user].empty(); }

    const Evaluation& evaluation(user_id user) const {
        if (user >= users_.size()) throw DataError("unknown user");
        return users_[user];
    }

    /// S_i(chi) as sorted user ids; empty for unknown or unrated items.
    const std::vector<user_id>& users_with_item(item_id item) const {
        static const std::vector<user_id> none;
        if (item >= item_users_.size()) return none;
        return item_users_[item];
    }

    std::size_t user_slots() const { return users_.size(); }
    std::size_t item_slots() const { return item_users_.size(); }
    std::size_t rating_count() const { return rating_count_; }

    std::size_t active_user_count() const {
        std::size_t n = 0;
        for (const auto& u : users_)
            if (!u.empty()) ++n;
        return n;
    }

    /// Rebuild the item index from the evaluations alone (used to check the
    /// index-consistency invariant).
    std::vector<std::vector<user_id>> rebuilt_index() const {
        std::vector<std::vector<user_id>> index(item_users_.size());
        for (const auto& u : users_)
            for (const auto& [item, value] : u) {
                (void)value;
                index[item].push_back(u.user());
            }
        return index;
    }

    const std::vector<std::vector<user_id>>& index() const { return item_users_; }

    bool operator==(const Dataset& other) const {
        return scale_.min == other.scale_.min && scale_.max == other.scale_.max &&
               scale_.step == other.scale_.step && users_ == other.users_ &&
               item_users_ == other.item_users_;
    }

    auto begin() const { return users_.begin(); }
    auto end() const { return users_.end(); }

private:
    RatingScale scale_;
    std::vector<Evaluation> users_;
    std::vector<std::vector<user_id>> item_users_;
    std::size_t rating_count_ = 0;
};

/// The seven prediction schemes, in one place so provenance can name them.
enum class SchemeId {
    per_user_average,
    bias_from_mean,
    adjusted_cosine_item,
    pearson,
    slope_one,
    weighted_slope_one,
    bipolar_slope_one,
};

/// Predicted values plus, per item, which scheme actually produced the value
/// and how many fallback steps it took to get there.
struct Prediction {
    struct Entry {
        double value = 0.0;
        SchemeId produced_by = SchemeId::per_user_average;
        int fallback_depth = 0;
    };

    std::map<item_id, Entry> entries;

    const Entry& at(item_id item) const {
        auto it = entries.find(item);
        if (it == entries.end()) throw InternalError("no prediction for item");
        return it->second;
    }

    double value(item_id item) const { return at(item).value; }
};

}  // namespace slopeone

#endif  // SLOPEONE_CORE_HPP
