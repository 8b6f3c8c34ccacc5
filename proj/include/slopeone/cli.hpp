#ifndef SLOPEONE_CLI_HPP
#define SLOPEONE_CLI_HPP

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slopeone/core.hpp"
#include "slopeone/data_io.hpp"
#include "slopeone/harness.hpp"
#include "slopeone/predictors.hpp"
#include "slopeone/text.hpp"

namespace slopeone::cli {

/// Bad flag values discovered after CLI11's own parse (exit code 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline RatingScale parse_scale(const std::string& text) {
    auto fields = split_fields(text, ':');
    if (fields.size() != 3)
        throw UsageError("--scale expects MIN:MAX:STEP, got '" + text + "'");
    auto mn = parse_double(trim(fields[0]));
    auto mx = parse_double(trim(fields[1]));
    auto st = parse_double(trim(fields[2]));
    if (!mn || !mx || !st)
        throw UsageError("--scale expects three numbers, got '" + text + "'");
    try {
        return RatingScale{*mn, *mx, *st};  // the constructor validates
    } catch (const DataError& e) {
        throw UsageError(std::string("invalid --scale: ") + e.what());
    }
}

inline CorpusFormat parse_format(const std::string& text) {
    if (text == "movielens-tab") return CorpusFormat::movielens_tab;
    if (text == "delimited") return CorpusFormat::delimited;
    throw UsageError("--format must be movielens-tab or delimited, got '" + text + "'");
}

inline SchemeId parse_scheme(std::string_view name) {
    auto scheme = scheme_from_name(trim(name));
    if (!scheme) throw UsageError("unknown scheme '" + std::string(trim(name)) + "'");
    return *scheme;
}

inline std::vector<SchemeId> parse_scheme_list(const std::string& text) {
    std::vector<SchemeId> schemes;
    for (std::string_view field : split_fields(text, ','))
        schemes.push_back(parse_scheme(field));
    return schemes;
}

inline char parse_delimiter(const std::string& text) {
    if (text == "\\t" || text == "tab") return '\t';
    if (text.size() != 1) throw UsageError("--delimiter expects a single character");
    return text[0];
}

/// "item=value,item=value" into a first-visitor evaluation; unknown item
/// names are interned locally so they resolve to data-free ids.
inline Evaluation parse_visitor_ratings(const std::string& text, const RatingScale& scale,
                                        Interner& names) {
    Evaluation visitor(0);
    for (std::string_view field : split_fields(text, ',')) {
        field = trim(field);
        if (field.empty()) continue;
        const std::size_t eq = field.find('=');
        if (eq == std::string_view::npos)
            throw UsageError("--ratings entries must look like item=value, got '" +
                             std::string(field) + "'");
        const std::string_view name = trim(field.substr(0, eq));
        const std::string_view value_text = trim(field.substr(eq + 1));
        if (name.empty()) throw UsageError("--ratings entry with an empty item name");
        auto value = parse_double(value_text);
        if (!value)
            throw UsageError("unparseable rating '" + std::string(value_text) + "' in --ratings");
        if (!scale.contains(*value))
            throw DataError("rating " + format_double(*value) + " outside scale [" +
                            format_double(scale.min) + ", " + format_double(scale.max) + "]");
        visitor.set(names.intern(name), *value);
    }
    if (visitor.empty()) throw UsageError("--ratings must contain at least one item=value entry");
    return visitor;
}

inline void print_prediction_line(std::ostream& out, const Interner& names, item_id item,
                                  const Prediction::Entry& e) {
    out << names.name(item) << '\t' << format_double(e.value) << '\t'
        << scheme_name(e.produced_by) << '\t' << e.fallback_depth << '\n';
}

struct SplitCsv {
    std::vector<std::string> fields;
    explicit SplitCsv(const std::string& text) {
        for (std::string_view f : split_fields(text, ',')) fields.emplace_back(trim(f));
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

struct CorpusFlags {
    std::string input;
    std::string format = "movielens-tab";
    std::string scale = "1:5:1";
    std::string delimiter = ",";
    bool header = false;

    LoadResult load(std::ostream& err) const {
        DelimitedOptions options;
        options.delimiter = detail::parse_delimiter(delimiter);
        options.has_header = header;
        LoadResult result = load_corpus_file(input, detail::parse_format(format),
                                             detail::parse_scale(scale), options);
        if (result.stats.deduplicated > 0)
            err << "warning: " << result.stats.deduplicated
                << " duplicate ratings in " << input << " (last value kept)\n";
        return result;
    }
};

inline int cmd_train(const CorpusFlags& corpus, const std::string& output, std::ostream& out,
                     std::ostream& err) {
    LoadResult lr = corpus.load(err);
    TrainedModel model =
        TrainedModel::train(std::move(lr.dataset), std::move(lr.users), std::move(lr.items));
    save_model_file(model, output);
    out << "users " << model.users().size() << '\n';
    out << "items " << model.items().size() << '\n';
    out << "ratings " << model.dataset().rating_count() << '\n';
    out << "plain-pairs " << model.plain().pair_count() << '\n';
    out << "like-pairs " << model.bipolar().like_pair_count() << '\n';
    out << "dislike-pairs " << model.bipolar().dislike_pair_count() << '\n';
    out << "model " << output << '\n';
    return 0;
}

inline int cmd_predict(const std::string& model_path, const std::string& scheme_text,
                       const std::string& ratings_text, std::size_t top,
                       const std::optional<std::string>& items_text, std::ostream& out) {
    TrainedModel model = load_model_file(model_path);
    const SchemeId scheme = detail::parse_scheme(scheme_text);
    Interner names = model.items();  // local copy; may grow with query-only items
    const Evaluation visitor =
        detail::parse_visitor_ratings(ratings_text, model.scale(), names);

    model.prepare(scheme);
    const ModelBundle bundle = model.bundle();

    if (items_text) {
        std::vector<item_id> requested;
        for (std::string_view field : split_fields(*items_text, ',')) {
            field = trim(field);
            if (field.empty()) continue;
            requested.push_back(names.intern(field));
        }
        if (requested.empty()) throw UsageError("--items must list at least one item");
        const Prediction p = predict(scheme, visitor, bundle, requested);
        for (item_id item : requested)
            detail::print_prediction_line(out, names, item, p.at(item));
        return 0;
    }

    // Recommendation mode: rank every model item the visitor has not rated.
    std::vector<item_id> candidates;
    for (item_id item = 0; item < model.items().size(); ++item)
        if (!visitor.contains(item)) candidates.push_back(item);
    const Prediction p = predict(scheme, visitor, bundle, candidates);
    std::vector<std::pair<item_id, Prediction::Entry>> ranked(p.entries.begin(),
                                                              p.entries.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.value != b.second.value) return a.second.value > b.second.value;
        return a.first < b.first;
    });
    if (ranked.size() > top) ranked.resize(top);
    for (const auto& [item, entry] : ranked)
        detail::print_prediction_line(out, names, item, entry);
    return 0;
}

inline int cmd_update(const std::string& model_path, const std::optional<std::string>& add,
                      const std::optional<std::string>& remove,
                      const std::optional<std::string>& set, std::ostream& out) {
    const int given = int(add.has_value()) + int(remove.has_value()) + int(set.has_value());
    if (given != 1) throw UsageError("update needs exactly one of --add, --remove, --set");

    TrainedModel model = load_model_file(model_path);

    const std::string& spec_text = add ? *add : remove ? *remove : *set;
    detail::SplitCsv fields(spec_text);
    const std::size_t expected = remove ? 2 : 3;
    if (fields.fields.size() != expected || fields.fields[0].empty() || fields.fields[1].empty())
        throw UsageError(remove ? "--remove expects USER,ITEM"
                                : "--add/--set expect USER,ITEM,VALUE");

    user_id uid;
    item_id iid;
    if (add) {
        // a brand-new visitor and item may enter the model here
        uid = model.mutable_users().intern(fields.fields[0]);
        iid = model.mutable_items().intern(fields.fields[1]);
    } else {
        auto u = model.users().lookup(fields.fields[0]);
        if (!u) throw DataError("unknown user '" + fields.fields[0] + "'");
        auto i = model.items().lookup(fields.fields[1]);
        if (!i) throw DataError("unknown item '" + fields.fields[1] + "'");
        uid = *u;
        iid = *i;
    }

    RatingChange change = RatingChange::remove();
    if (!remove) {
        auto value = parse_double(fields.fields[2]);
        if (!value) throw UsageError("unparseable rating value '" + fields.fields[2] + "'");
        change = add ? RatingChange::add(*value) : RatingChange::update(*value);
    }

    const UpdateStats stats = model.apply(uid, iid, change);
    save_model_file(model, model_path);
    out << "adjusted-plain-pairs " << stats.plain_adjusted << '\n';
    out << "adjusted-polar-pairs " << stats.bipolar_adjusted << '\n';
    out << "model " << model_path << '\n';
    return 0;
}

inline int cmd_evaluate(const CorpusFlags& corpus, std::size_t train_target,
                        const std::optional<std::size_t>& test_target,
                        const std::string& schemes_text, double divisor, std::uint64_t seed,
                        const std::string& order_text, const std::optional<std::string>& out_path,
                        std::ostream& out, std::ostream& err) {
    if (!(divisor > 0.0)) throw UsageError("--divisor must be > 0");
    SelectionOrder order;
    if (order_text == "seeded-shuffle")
        order = SelectionOrder::seeded_shuffle;
    else if (order_text == "dataset-order")
        order = SelectionOrder::dataset_order;
    else
        throw UsageError("--order must be seeded-shuffle or dataset-order");

    const std::vector<SchemeId> schemes =
        schemes_text.empty()
            ? std::vector<SchemeId>(kReportOrder.begin(), kReportOrder.end())
            : detail::parse_scheme_list(schemes_text);

    LoadResult lr = corpus.load(err);

    SplitSpec spec;
    spec.train_ratings = train_target;
    spec.test_ratings = test_target;
    spec.order = order;
    spec.seed = seed;
    SplitResult sr = split(lr.dataset, spec);
    if (sr.test_target_relaxed)
        err << "warning: test target " << *test_target << " exceeds the "
            << sr.test_rating_count << " ratings left after training; keeping all of them\n";
    if (sr.test_users.empty()) throw DataError("the split produced an empty test set");

    TrainedModel model = TrainedModel::train(std::move(sr.train), std::move(lr.users),
                                             std::move(lr.items));
    MAEReport report = compare_schemes(model, sr.test_users, schemes, divisor);
    report.order = order;
    report.seed = seed;
    report.train_ratings = sr.train_rating_count;
    report.test_ratings = sr.test_rating_count;
    report.train_users = model.dataset().active_user_count();
    report.test_users = sr.test_users.size();

    out << "train " << report.train_ratings << " ratings / " << report.train_users
        << " users, test " << report.test_ratings << " ratings / " << report.test_users
        << " users (order " << selection_order_name(order) << ", seed " << seed << ")\n";
    render_table(report, out);

    if (out_path) {
        std::ofstream file(*out_path);
        if (!file) throw DataError("cannot open report file for writing: " + *out_path);
        write_tsv(report, file);
        file.flush();
        if (!file) throw DataError("failed while writing report file: " + *out_path);
    }
    return report.failures.empty() ? 0 : 2;
}

inline int cmd_inspect(const std::string& model_path, const std::string& pair_text,
                       std::ostream& out) {
    TrainedModel model = load_model_file(model_path);
    detail::SplitCsv fields(pair_text);
    if (fields.fields.size() != 2 || fields.fields[0].empty() || fields.fields[1].empty())
        throw UsageError("--pair expects ITEM,ITEM");
    auto first = model.items().lookup(fields.fields[0]);
    if (!first) throw DataError("unknown item '" + fields.fields[0] + "'");
    auto second = model.items().lookup(fields.fields[1]);
    if (!second) throw DataError("unknown item '" + fields.fields[1] + "'");

    // Deviations of the second item relative to the first: positive means
    // the second item is rated higher by their common raters.
    out << "pair " << fields.fields[0] << ',' << fields.fields[1] << '\n';
    auto print = [&](const char* label, PairDeviation d) {
        out << label << " dev " << (d.count > 0 ? format_double(d.dev) : std::string("-"))
            << " count " << d.count << '\n';
    };
    print("plain", model.plain().deviation(*second, *first));
    print("like", model.bipolar().like(*second, *first));
    print("dislike", model.bipolar().dislike(*second, *first));
    return 0;
}

// ---------------------------------------------------------------------------
// Entry point; testable in-process.
// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"in-memory collaborative filtering engine"};
    app.name("slopeone");
    app.require_subcommand(1);

    CorpusFlags train_corpus;
    std::string train_output;
    CLI::App* train = app.add_subcommand("train", "build deviation stores from a rating corpus");
    train->add_option("--input", train_corpus.input, "rating corpus file")->required();
    train->add_option("--format", train_corpus.format, "movielens-tab or delimited");
    train->add_option("--scale", train_corpus.scale, "rating scale MIN:MAX:STEP");
    train->add_option("--delimiter", train_corpus.delimiter, "field delimiter (delimited format)");
    train->add_flag("--header", train_corpus.header, "skip a header line (delimited format)");
    train->add_option("--output", train_output, "model file to write")->required();

    std::string predict_model, predict_scheme = "weighted-slope-one", predict_ratings;
    std::size_t predict_top = 10;
    std::optional<std::string> predict_items;
    CLI::App* predict = app.add_subcommand("predict", "predict ratings for a first visitor");
    predict->add_option("--model", predict_model, "model file")->required();
    predict->add_option("--scheme", predict_scheme, "prediction scheme");
    predict->add_option("--ratings", predict_ratings, "visitor ratings item=value,...")
        ->required();
    auto* top_opt = predict->add_option("--top", predict_top, "print the N best unrated items");
    predict->add_option("--items", predict_items, "predict exactly these items (comma list)")
        ->excludes(top_opt);

    std::string update_model;
    std::optional<std::string> update_add, update_remove, update_set;
    CLI::App* update = app.add_subcommand("update", "apply one rating change to a saved model");
    update->add_option("--model", update_model, "model file (rewritten in place)")->required();
    update->add_option("--add", update_add, "add USER,ITEM,VALUE");
    update->add_option("--remove", update_remove, "remove USER,ITEM");
    update->add_option("--set", update_set, "change USER,ITEM,VALUE");

    CorpusFlags eval_corpus;
    std::size_t eval_train = 0;
    std::optional<std::size_t> eval_test;
    std::string eval_schemes;
    double eval_divisor = 1.0;
    std::uint64_t eval_seed = 0;
    std::string eval_order = "seeded-shuffle";
    std::optional<std::string> eval_out;
    CLI::App* evaluate = app.add_subcommand("evaluate", "hide-one benchmark over a corpus split");
    evaluate->add_option("--input", eval_corpus.input, "rating corpus file")->required();
    evaluate->add_option("--format", eval_corpus.format, "movielens-tab or delimited");
    evaluate->add_option("--scale", eval_corpus.scale, "rating scale MIN:MAX:STEP");
    evaluate->add_option("--delimiter", eval_corpus.delimiter,
                         "field delimiter (delimited format)");
    evaluate->add_flag("--header", eval_corpus.header, "skip a header line (delimited format)");
    evaluate->add_option("--train-ratings", eval_train, "training set rating target")->required();
    evaluate->add_option("--test-ratings", eval_test,
                         "test set rating target (default: all remaining)");
    evaluate->add_option("--schemes", eval_schemes, "comma list of schemes (default: all)");
    evaluate->add_option("--divisor", eval_divisor, "normalization divisor for reported MAE");
    evaluate->add_option("--seed", eval_seed, "shuffle seed");
    evaluate->add_option("--order", eval_order, "seeded-shuffle or dataset-order");
    evaluate->add_option("--out", eval_out, "also write a tab-separated report here");

    std::string inspect_model, inspect_pair;
    CLI::App* inspect = app.add_subcommand("inspect", "show stored deviations for an item pair");
    inspect->add_option("--model", inspect_model, "model file")->required();
    inspect->add_option("--pair", inspect_pair, "ITEM,ITEM (deviation of second relative to first)")
        ->required();

    try {
        std::vector<const char*> argv;
        argv.reserve(args.size() + 1);
        argv.push_back("slopeone");
        for (const std::string& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());

        if (*train) return cmd_train(train_corpus, train_output, out, err);
        if (*predict)
            return cmd_predict(predict_model, predict_scheme, predict_ratings, predict_top,
                               predict_items, out);
        if (*update) return cmd_update(update_model, update_add, update_remove, update_set, out);
        if (*evaluate)
            return cmd_evaluate(eval_corpus, eval_train, eval_test, eval_schemes, eval_divisor,
                                eval_seed, eval_order, eval_out, out, err);
        if (*inspect) return cmd_inspect(inspect_model, inspect_pair, out);
        err << "error: no command given\n";
        return 1;
    } catch (const CLI::Success& e) {
        app.exit(e, out, err);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const InternalError& e) {
        err << "internal error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 3;
    }
}

}  // namespace slopeone::cli

#endif  // SLOPEONE_CLI_HPP
