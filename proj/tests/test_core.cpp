#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "slopeone/core.hpp"
#include "util.hpp"

using namespace slopeone;

TEST_CASE("rating scale validation") {
    CHECK_NOTHROW(RatingScale(1.0, 5.0, 1.0).validate());
    CHECK_NOTHROW(RatingScale(0.0, 1.0, 0.2).validate());
    CHECK_THROWS_AS(RatingScale(5.0, 1.0, 1.0), DataError);   // min >= max
    CHECK_THROWS_AS(RatingScale(1.0, 5.0, 0.0), DataError);   // step <= 0
    CHECK_THROWS_AS(RatingScale(1.0, 5.0, -1.0), DataError);
    CHECK_THROWS_AS(RatingScale(0.0, 1.0, 0.3), DataError);   // span not a multiple
    RatingScale nan_scale;
    nan_scale.min = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nan_scale.validate(), DataError);
}

TEST_CASE("clamp corrects range only") {
    const RatingScale unit{0.0, 1.0, 0.2};
    CHECK(clamp(1.2, unit) == 1.0);
    CHECK(clamp(0.6, unit) == 0.6);
    CHECK(clamp(-0.3, unit) == 0.0);
    // not snapped to the step grid
    CHECK(clamp(0.55, unit) == 0.55);
    // idempotent
    CHECK(clamp(clamp(1.7, unit), unit) == clamp(1.7, unit));
    CHECK_THROWS_AS(clamp(std::numeric_limits<double>::infinity(), unit), DataError);
    CHECK_THROWS_AS(clamp(std::numeric_limits<double>::quiet_NaN(), unit), DataError);
}

TEST_CASE("evaluation mean") {
    CHECK(evaluation_mean(Evaluation(0, {{0, 1.0}, {1, 1.5}})) == 1.25);
    CHECK(evaluation_mean(Evaluation(0, {{7, 2.0}})) == 2.0);
    CHECK(evaluation_mean(Evaluation(0, {{0, 1.0}, {1, 2.0}, {2, 3.0}})) == 2.0);
    CHECK_THROWS_WITH(Evaluation(0).mean(), "empty evaluation");
}

TEST_CASE("evaluation mutation and lookup") {
    Evaluation u(3);
    CHECK(u.empty());
    CHECK(!u.set(5, 4.0).has_value());
    CHECK(!u.set(2, 1.0).has_value());
    CHECK(u.set(5, 3.0) == 4.0);  // replace returns prior
    CHECK(u.size() == 2);
    CHECK(u.contains(2));
    CHECK(!u.contains(4));
    REQUIRE(u.find(5) != nullptr);
    CHECK(*u.find(5) == 3.0);
    CHECK(u.find(9) == nullptr);

    // iteration is sorted by item
    std::vector<item_id> order;
    for (const auto& [item, value] : u) order.push_back(item);
    CHECK(order == std::vector<item_id>{2, 5});

    CHECK(u.erase(2) == 1.0);
    CHECK(!u.erase(2).has_value());
    CHECK(u.size() == 1);
}

TEST_CASE("without hides one rating and leaves the original intact") {
    const Evaluation u(1, {{0, 1.0}, {1, 3.0}, {2, 5.0}});
    const Evaluation hidden = u.without(1);
    CHECK(hidden.size() == 2);
    CHECK(!hidden.contains(1));
    CHECK(hidden.contains(0));
    CHECK(u.size() == 3);  // untouched
    CHECK(u.contains(1));
    // hiding an absent item is a plain copy
    CHECK(u.without(9) == u);
}

TEST_CASE("mean stays within the scale for random evaluations") {
    std::mt19937_64 rng(101);
    const RatingScale scale{1.0, 5.0, 1.0};
    for (int round = 0; round < 200; ++round) {
        const oracle::Ratings r = testutil::random_visitor(rng);
        const Evaluation u = testutil::to_evaluation(0, r);
        const double m = u.mean();
        CHECK(m >= scale.min);
        CHECK(m <= scale.max);
        CHECK(m == Catch::Approx(oracle::mean(r)).epsilon(0).margin(0));
    }
}

TEST_CASE("interner assigns dense handles in first-appearance order") {
    Interner names;
    CHECK(names.intern("196") == 0);
    CHECK(names.intern("242") == 1);
    CHECK(names.intern("196") == 0);  // stable
    CHECK(names.size() == 2);
    CHECK(names.name(1) == "242");
    CHECK(names.lookup("242") == 1u);
    CHECK(!names.lookup("7").has_value());
    CHECK_THROWS_AS(names.name(2), InternalError);

    Interner same;
    same.intern("196");
    same.intern("242");
    CHECK(names == same);
}

TEST_CASE("dataset keeps ratings, counts, and the item index consistent") {
    Dataset data(RatingScale{1.0, 5.0, 1.0});
    CHECK(!data.set_rating(0, 0, 3.0).has_value());
    CHECK(!data.set_rating(0, 1, 4.0).has_value());
    CHECK(!data.set_rating(1, 1, 2.0).has_value());
    CHECK(data.rating_count() == 3);

    // re-rating replaces, does not grow
    CHECK(data.set_rating(0, 1, 5.0) == 4.0);
    CHECK(data.rating_count() == 3);
    CHECK(*data.evaluation(0).find(1) == 5.0);

    CHECK(data.users_with_item(1) == std::vector<user_id>{0, 1});
    CHECK(data.users_with_item(0) == std::vector<user_id>{0});
    CHECK(data.users_with_item(42).empty());

    CHECK_THROWS_AS(data.set_rating(0, 2, 6.0), DataError);   // outside scale
    CHECK_THROWS_AS(data.set_rating(0, 2, 0.5), DataError);

    CHECK(data.remove_rating(1, 1) == 2.0);
    CHECK(data.rating_count() == 2);
    CHECK_THROWS_WITH(data.remove_rating(1, 1), "user has no rating for item");
    CHECK_THROWS_WITH(data.remove_rating(9, 1), "unknown user");
    CHECK(!data.has_user(1));  // slot kept, but inactive
    CHECK(data.has_user(0));
    CHECK(data.active_user_count() == 1);
    CHECK(data.user_slots() == 2);
}

TEST_CASE("item index round-trips after random mutation") {
    std::mt19937_64 rng(77);
    Dataset data(RatingScale{1.0, 5.0, 1.0});
    std::uniform_int_distribution<int> uid(0, 7), iid(0, 7), val(1, 5), op(0, 3);
    for (int step = 0; step < 500; ++step) {
        const user_id u = static_cast<user_id>(uid(rng));
        const item_id i = static_cast<item_id>(iid(rng));
        if (op(rng) == 0 && u < data.user_slots() && data.evaluation(u).contains(i))
            data.remove_rating(u, i);
        else
            data.set_rating(u, i, static_cast<double>(val(rng)));
    }
    CHECK(data.rebuilt_index() == data.index());

    std::size_t total = 0;
    for (const Evaluation& u : data) total += u.size();
    CHECK(total == data.rating_count());
}

TEST_CASE("prediction container provenance access") {
    Prediction p;
    p.entries[4] = {3.5, SchemeId::weighted_slope_one, 0};
    CHECK(p.value(4) == 3.5);
    CHECK(p.at(4).produced_by == SchemeId::weighted_slope_one);
    CHECK_THROWS_AS(p.at(5), InternalError);
}
