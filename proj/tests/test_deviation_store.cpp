#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "slopeone/deviation.hpp"
#include "util.hpp"

using namespace slopeone;

namespace {

// I and J from the two-user worked example: I=0, J=1.
Dataset fig1_dataset() { return testutil::to_dataset(testutil::fig1(), {1.0, 5.0, 0.5}); }

}  // namespace

TEST_CASE("build reproduces the worked example deviation") {
    const DeviationStore store = DeviationStore::build(fig1_dataset());
    const PairDeviation d = store.deviation(1, 0);  // dev_{J,I}
    CHECK(d.dev == 0.5);
    CHECK(d.count == 1);
    CHECK(store.pair_count() == 1);
}

TEST_CASE("single-rating users produce no pairs") {
    Dataset data(RatingScale{1.0, 5.0, 1.0});
    data.set_rating(0, 0, 3.0);
    const auto [plain, bipolar] = build_stores(data);
    CHECK(plain.pair_count() == 0);
    CHECK(bipolar.like_pair_count() == 0);
    CHECK(bipolar.dislike_pair_count() == 0);
}

TEST_CASE("three-user fixture deviations") {
    const DeviationStore store = DeviationStore::build(testutil::to_dataset(testutil::f2()));
    CHECK(store.deviation(1, 0).dev == 1.5);  // dev_{2,1}
    CHECK(store.deviation(1, 0).count == 2);
    CHECK(store.deviation(2, 0).dev == 2.0);  // dev_{3,1}
    CHECK(store.deviation(2, 0).count == 1);
    CHECK(store.deviation(2, 1).dev == 1.5);  // dev_{3,2}
    CHECK(store.deviation(2, 1).count == 2);
}

TEST_CASE("deviation reads are antisymmetric with symmetric counts") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 50; ++round) {
        const oracle::Table table = testutil::random_table(rng);
        const DeviationStore store = DeviationStore::build(testutil::to_dataset(table));
        for (unsigned j = 0; j < 5; ++j)
            for (unsigned i = 0; i < 5; ++i) {
                const PairDeviation a = store.deviation(j, i);
                const PairDeviation b = store.deviation(i, j);
                CHECK(a.count == b.count);
                CHECK(a.dev == -b.dev);
                // cross-check against the direct formula
                const oracle::Dev expect = oracle::deviation(table, j, i);
                CHECK(a.count == expect.count);
                CHECK(a.dev == Catch::Approx(expect.dev).margin(1e-12));
            }
    }
}

TEST_CASE("diagonal pairs are never stored") {
    const DeviationStore store = DeviationStore::build(testutil::to_dataset(testutil::f2()));
    CHECK(store.deviation(1, 1).dev == 0.0);
    CHECK(store.deviation(1, 1).count == 0);
}

TEST_CASE("bipolar build splits strictly around each user's mean") {
    // u0 = {0:5, 1:4, 2:1}: mean 10/3, liked {0,1}, disliked {2}
    // u1 = {0:4, 1:2, 2:3}: mean 3, liked {0}, disliked {1}, item 2 at mean
    oracle::Table table = {{0, {{0, 5.0}, {1, 4.0}, {2, 1.0}}},
                           {1, {{0, 4.0}, {1, 2.0}, {2, 3.0}}}};
    const Dataset data = testutil::to_dataset(table);
    const BipolarDeviationStore store = BipolarDeviationStore::build(data);

    const auto snap0 = store.snapshot(0);
    CHECK(snap0.liked == std::vector<item_id>{0, 1});
    CHECK(snap0.disliked == std::vector<item_id>{2});
    const auto snap1 = store.snapshot(1);
    CHECK(snap1.liked == std::vector<item_id>{0});
    CHECK(snap1.disliked == std::vector<item_id>{1});  // item 2 exactly at mean: neither

    // only u0 contributes a like-like pair: (0,1) with dev_{1,0} = 4-5 = -1
    CHECK(store.like_pair_count() == 1);
    CHECK(store.like(1, 0).dev == -1.0);
    CHECK(store.like(1, 0).count == 1);
    CHECK(store.dislike_pair_count() == 0);

    // matches the brute-force polar deviation
    const oracle::Dev expect = oracle::polar_deviation(table, 1, 0, true);
    CHECK(store.like(1, 0).count == expect.count);
    CHECK(store.like(1, 0).dev == expect.dev);
}

TEST_CASE("bipolar membership is disjoint and bounded by plain counts") {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 60; ++round) {
        const oracle::Table table = testutil::random_table(rng);
        const Dataset data = testutil::to_dataset(table);
        const auto [plain, bipolar] = build_stores(data);

        for (const Evaluation& u : data) {
            if (u.empty()) continue;
            const auto snap = bipolar.snapshot(u.user());
            for (item_id liked : snap.liked)
                CHECK(std::find(snap.disliked.begin(), snap.disliked.end(), liked) ==
                      snap.disliked.end());
        }
        for (unsigned j = 0; j < 5; ++j)
            for (unsigned i = 0; i < j; ++i) {
                const auto like = bipolar.like(j, i);
                const auto dislike = bipolar.dislike(j, i);
                const auto all = plain.deviation(j, i);
                CHECK(like.count + dislike.count <= all.count);
                const oracle::Dev el = oracle::polar_deviation(table, j, i, true);
                const oracle::Dev ed = oracle::polar_deviation(table, j, i, false);
                CHECK(like.count == el.count);
                CHECK(dislike.count == ed.count);
                CHECK(like.dev == Catch::Approx(el.dev).margin(1e-12));
                CHECK(dislike.dev == Catch::Approx(ed.dev).margin(1e-12));
            }
    }
}

TEST_CASE("adding a rating updates the affected pair exactly") {
    Dataset data = fig1_dataset();
    auto [plain, bipolar] = build_stores(data);

    // B adds J = 2.5: dev_{J,I} becomes ((1.5-1)+(2.5-2))/2 = 0.5, count 2
    const UpdateStats stats =
        apply_rating_change(plain, bipolar, data, 1, 1, RatingChange::add(2.5));
    CHECK(stats.plain_adjusted == 1);
    const PairDeviation d = plain.deviation(1, 0);
    CHECK(d.dev == 0.5);
    CHECK(d.count == 2);
    CHECK(*data.evaluation(1).find(1) == 2.5);
}

TEST_CASE("remove then re-add restores the store") {
    Dataset data = testutil::to_dataset(testutil::f2());
    auto [plain, bipolar] = build_stores(data);
    const auto before_plain = plain.records();
    const auto before_like = bipolar.like_records();
    const auto before_dislike = bipolar.dislike_records();

    apply_rating_change(plain, bipolar, data, 0, 1, RatingChange::remove());
    apply_rating_change(plain, bipolar, data, 0, 1, RatingChange::add(2.0));

    CHECK(testutil::stores_close(before_plain, plain.records(), 1e-9));
    CHECK(testutil::stores_close(before_like, bipolar.like_records(), 1e-9));
    CHECK(testutil::stores_close(before_dislike, bipolar.dislike_records(), 1e-9));
    CHECK(data == testutil::to_dataset(testutil::f2()));
}

TEST_CASE("updating a rating to its current value changes nothing") {
    Dataset data = testutil::to_dataset(testutil::f2());
    auto [plain, bipolar] = build_stores(data);
    const DeviationStore plain_before = plain;
    const BipolarDeviationStore bipolar_before = bipolar;

    const UpdateStats stats =
        apply_rating_change(plain, bipolar, data, 0, 1, RatingChange::update(2.0));
    CHECK(stats.total() == 0);
    CHECK(plain == plain_before);      // bitwise: early-out before any arithmetic
    CHECK(bipolar == bipolar_before);
}

TEST_CASE("update validation errors") {
    Dataset data = fig1_dataset();
    auto [plain, bipolar] = build_stores(data);

    CHECK_THROWS_WITH(apply_rating_change(plain, bipolar, data, 0, 0, RatingChange::add(3.0)),
                      "duplicate rating");
    CHECK_THROWS_WITH(apply_rating_change(plain, bipolar, data, 9, 0, RatingChange::remove()),
                      "unknown user");
    CHECK_THROWS_WITH(apply_rating_change(plain, bipolar, data, 1, 1, RatingChange::remove()),
                      "user has no rating for item");
    CHECK_THROWS_AS(apply_rating_change(plain, bipolar, data, 1, 1, RatingChange::add(99.0)),
                    DataError);
    CHECK_THROWS_AS(apply_rating_change(plain, bipolar, data, 0, 0, RatingChange::update(99.0)),
                    DataError);
}

TEST_CASE("a mean shift can flip polar membership and stays exact") {
    // u0 likes item 1 (of {0:2, 1:4}); adding item 2 = 5 moves the mean to
    // 11/3, flipping item 1 from liked to... still liked; but removing item 0
    // would put everything at the mean. Walk several reshapes and compare
    // against a fresh build every time.
    Dataset data(RatingScale{1.0, 5.0, 1.0});
    data.set_rating(0, 0, 2.0);
    data.set_rating(0, 1, 4.0);
    data.set_rating(1, 0, 1.0);
    data.set_rating(1, 1, 5.0);
    auto [plain, bipolar] = build_stores(data);

    auto check_against_batch = [&]() {
        const auto [fresh_plain, fresh_bipolar] = build_stores(data);
        CHECK(testutil::stores_close(plain.records(), fresh_plain.records(), 1e-9));
        CHECK(testutil::stores_close(bipolar.like_records(), fresh_bipolar.like_records(), 1e-9));
        CHECK(testutil::stores_close(bipolar.dislike_records(),
                                     fresh_bipolar.dislike_records(), 1e-9));
        for (const Evaluation& u : data)
            if (!u.empty()) CHECK(bipolar.snapshot(u.user()) == fresh_bipolar.snapshot(u.user()));
    };

    apply_rating_change(plain, bipolar, data, 0, 2, RatingChange::add(5.0));
    check_against_batch();
    apply_rating_change(plain, bipolar, data, 0, 0, RatingChange::update(4.0));
    check_against_batch();
    apply_rating_change(plain, bipolar, data, 0, 1, RatingChange::remove());
    check_against_batch();
    apply_rating_change(plain, bipolar, data, 0, 0, RatingChange::remove());
    apply_rating_change(plain, bipolar, data, 0, 2, RatingChange::remove());  // user empties out
    check_against_batch();
    apply_rating_change(plain, bipolar, data, 0, 1, RatingChange::add(3.0));  // and comes back
    check_against_batch();
}

TEST_CASE("incremental updates equal a batch rebuild on random sequences") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> uid(0, 5), iid(0, 5), val(1, 5), kind(0, 2), len(1, 40);

    for (int round = 0; round < 40; ++round) {
        Dataset data = testutil::to_dataset(testutil::random_table(rng, 6, 6));
        auto [plain, bipolar] = build_stores(data);

        const int ops = len(rng);
        for (int k = 0; k < ops; ++k) {
            const user_id u = static_cast<user_id>(uid(rng));
            const item_id i = static_cast<item_id>(iid(rng));
            const double v = static_cast<double>(val(rng));
            const bool exists =
                u < data.user_slots() && data.has_user(u) && data.evaluation(u).contains(i);
            switch (kind(rng)) {
                case 0:
                    if (!exists)
                        apply_rating_change(plain, bipolar, data, u, i, RatingChange::add(v));
                    break;
                case 1:
                    if (exists)
                        apply_rating_change(plain, bipolar, data, u, i, RatingChange::remove());
                    break;
                default:
                    if (exists)
                        apply_rating_change(plain, bipolar, data, u, i, RatingChange::update(v));
                    break;
            }
        }

        const auto [batch_plain, batch_bipolar] = build_stores(data);
        REQUIRE(testutil::stores_close(plain.records(), batch_plain.records(), 1e-9));
        REQUIRE(testutil::stores_close(bipolar.like_records(), batch_bipolar.like_records(),
                                       1e-9));
        REQUIRE(testutil::stores_close(bipolar.dislike_records(),
                                       batch_bipolar.dislike_records(), 1e-9));
        for (const Evaluation& u : data)
            if (!u.empty())
                REQUIRE(bipolar.snapshot(u.user()) == batch_bipolar.snapshot(u.user()));
    }
}
