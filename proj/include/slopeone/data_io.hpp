#ifndef SLOPEONE_DATA_IO_HPP
#define SLOPEONE_DATA_IO_HPP

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "slopeone/core.hpp"
#include "slopeone/deviation.hpp"
#include "slopeone/predictors.hpp"
#include "slopeone/text.hpp"

namespace slopeone {

// ---------------------------------------------------------------------------
// Rating corpora.
// ---------------------------------------------------------------------------

enum class CorpusFormat {
    movielens_tab,  // user <TAB> item <TAB> rating [<TAB> timestamp]
    delimited,      // user <D> item <D> rating, configurable delimiter
};

struct DelimitedOptions {
    char delimiter = ',';
    bool has_header = false;
};

struct CorpusStats {
    std::size_t lines = 0;         // data lines parsed (blank/header excluded)
    std::size_t accepted = 0;      // distinct (user, item) pairs stored
    std::size_t deduplicated = 0;  // repeated pairs; the last value wins
    std::size_t rejected = 0;      // always 0 today: bad records raise instead
};

struct LoadResult {
    Dataset dataset;
    Interner users;
    Interner items;
    CorpusStats stats;
};

inline LoadResult load_corpus(std::istream& in, CorpusFormat format, const RatingScale& scale,
                              const DelimitedOptions& options = {}) {
    scale.validate();
    LoadResult result;
    result.dataset = Dataset(scale);

    const char delim = format == CorpusFormat::movielens_tab ? '\t' : options.delimiter;
    const std::size_t min_fields = 3;
    bool skip_header = format == CorpusFormat::delimited && options.has_header;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        if (skip_header) {
            skip_header = false;
            continue;
        }
        auto fields = split_fields(view, delim);
        if (fields.size() < min_fields)
            throw DataError("line " + std::to_string(line_no) + ": expected at least 3 fields, got " +
                            std::to_string(fields.size()));
        const std::string_view user_raw = trim(fields[0]);
        const std::string_view item_raw = trim(fields[1]);
        const std::string_view rating_raw = trim(fields[2]);
        if (user_raw.empty() || item_raw.empty())
            throw DataError("line " + std::to_string(line_no) + ": empty user or item field");
        const auto rating = parse_double(rating_raw);
        if (!rating)
            throw DataError("line " + std::to_string(line_no) + ": unparseable rating '" +
                            std::string(rating_raw) + "'");
        if (!scale.contains(*rating))
            throw DataError("line " + std::to_string(line_no) + ": rating " +
                            format_double(*rating) + " outside scale [" +
                            format_double(scale.min) + ", " + format_double(scale.max) + "]");
        const user_id uid = result.users.intern(user_raw);
        const item_id iid = result.items.intern(item_raw);
        const auto prior = result.dataset.set_rating(uid, iid, *rating);
        ++result.stats.lines;
        if (prior)
            ++result.stats.deduplicated;
        else
            ++result.stats.accepted;
    }
    return result;
}

inline LoadResult load_corpus_file(const std::string& path, CorpusFormat format,
                                   const RatingScale& scale,
                                   const DelimitedOptions& options = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    return load_corpus(in, format, scale, options);
}

// ---------------------------------------------------------------------------
// Model persistence: a line-oriented text format with a trailing checksum.
// Numbers round-trip exactly (shortest to_chars form).
// ---------------------------------------------------------------------------

struct ModelVersionError : DataError {
    using DataError::DataError;
};
struct ModelTruncatedError : DataError {
    using DataError::DataError;
};
struct ModelChecksumError : DataError {
    using DataError::DataError;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

inline std::string hex64(std::uint64_t value) {
    char buf[17];
    static const char digits[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = digits[value & 0xf];
        value >>= 4;
    }
    return std::string(buf, 16);
}

inline void write_pair_section(std::ostream& out, const char* name,
                               const std::vector<PairRecord>& records) {
    out << name << '\n';
    for (const PairRecord& r : records)
        out << r.lo << ' ' << r.hi << ' ' << format_double(r.diff_sum) << ' ' << r.count << '\n';
}

}  // namespace detail

inline constexpr std::string_view kModelMagic = "slopeone-model";
inline constexpr int kModelVersion = 1;

inline void save_model(const TrainedModel& model, std::ostream& out) {
    std::ostringstream body;
    const Dataset& data = model.dataset();
    const RatingScale& scale = data.scale();

    const auto plain_records = model.plain().records();
    const auto like_records = model.bipolar().like_records();
    const auto dislike_records = model.bipolar().dislike_records();

    body << kModelMagic << ' ' << kModelVersion << '\n';
    body << "scale " << format_double(scale.min) << ' ' << format_double(scale.max) << ' '
         << format_double(scale.step) << '\n';
    body << "counts " << model.users().size() << ' ' << model.items().size() << ' '
         << data.rating_count() << ' ' << plain_records.size() << ' ' << like_records.size()
         << ' ' << dislike_records.size() << '\n';
    for (std::uint32_t i = 0; i < model.items().size(); ++i)
        body << "item " << model.items().name(i) << '\n';
    for (std::uint32_t i = 0; i < model.users().size(); ++i)
        body << "user " << model.users().name(i) << '\n';
    body << "ratings\n";
    for (const Evaluation& u : data)
        for (const auto& [item, value] : u)
            body << u.user() << ' ' << item << ' ' << format_double(value) << '\n';
    detail::write_pair_section(body, "plain", plain_records);
    detail::write_pair_section(body, "like", like_records);
    detail::write_pair_section(body, "dislike", dislike_records);

    const std::string text = body.str();
    out << text << "checksum " << detail::hex64(detail::fnv1a64(text)) << '\n';
    if (!out) throw DataError("failed while writing model");
}

inline void save_model_file(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    save_model(model, out);
    out.flush();
    if (!out) throw DataError("failed while writing model file: " + path);
}

namespace detail {

struct ModelLines {
    std::vector<std::string_view> lines;
    std::size_t next = 0;

    bool done() const { return next >= lines.size(); }
    std::string_view take(const char* section) {
        if (done())
            throw ModelTruncatedError(std::string("model file ends inside the ") + section +
                                      " section");
        return lines[next++];
    }
};

inline std::string_view expect_prefix(std::string_view line, std::string_view prefix,
                                      const char* what) {
    if (line.size() < prefix.size() || line.substr(0, prefix.size()) != prefix)
        throw DataError(std::string("malformed model line (expected ") + what + "): " +
                        std::string(line));
    return line.substr(prefix.size());
}

inline std::uint64_t parse_count(std::string_view text, const char* what) {
    auto value = parse_uint(text);
    if (!value) throw DataError(std::string("malformed ") + what + " in model file");
    return *value;
}

}  // namespace detail

inline TrainedModel load_model(std::istream& in) {
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.empty()) throw ModelTruncatedError("model file is empty");

    // Locate the trailing checksum line and verify it before trusting the body.
    const std::string_view needle = "checksum ";
    std::size_t pos = content.rfind(needle);
    while (pos != std::string::npos && pos != 0 && content[pos - 1] != '\n')
        pos = pos ? content.rfind(needle, pos - 1) : std::string::npos;
    if (pos == std::string::npos)
        throw ModelTruncatedError("model file has no checksum line");
    std::string_view tail = std::string_view(content).substr(pos + needle.size());
    if (!tail.empty() && tail.back() == '\n') tail.remove_suffix(1);
    tail = trim(tail);
    std::uint64_t stored = 0;
    {
        const char* b = tail.data();
        const char* e = b + tail.size();
        auto [ptr, ec] = std::from_chars(b, e, stored, 16);
        if (ec != std::errc() || ptr != e || tail.size() != 16)
            throw ModelChecksumError("malformed checksum line");
    }
    const std::string_view bytes = std::string_view(content).substr(0, pos);
    const std::uint64_t actual = detail::fnv1a64(bytes);
    if (actual != stored)
        throw ModelChecksumError("model checksum mismatch: stored " + detail::hex64(stored) +
                                 ", computed " + detail::hex64(actual));

    detail::ModelLines reader;
    {
        std::size_t start = 0;
        while (start < bytes.size()) {
            std::size_t nl = bytes.find('\n', start);
            if (nl == std::string_view::npos) nl = bytes.size();
            reader.lines.push_back(bytes.substr(start, nl - start));
            start = nl + 1;
        }
    }

    // header
    {
        std::string_view header = reader.take("header");
        if (header.substr(0, kModelMagic.size()) != kModelMagic)
            throw ModelVersionError("not a model file (bad magic)");
        std::string_view rest = trim(header.substr(kModelMagic.size()));
        auto version = parse_uint(rest);
        if (!version || *version != static_cast<std::uint64_t>(kModelVersion))
            throw ModelVersionError("unsupported model version: " + std::string(rest));
    }

    RatingScale scale;
    {
        auto fields = split_fields(detail::expect_prefix(reader.take("header"), "scale ", "scale"),
                                   ' ');
        if (fields.size() != 3) throw DataError("malformed scale line in model file");
        auto mn = parse_double(fields[0]);
        auto mx = parse_double(fields[1]);
        auto st = parse_double(fields[2]);
        if (!mn || !mx || !st) throw DataError("malformed scale line in model file");
        scale = RatingScale{*mn, *mx, *st};
        scale.validate();
    }

    std::uint64_t n_users = 0, n_items = 0, n_ratings = 0, n_plain = 0, n_like = 0,
                  n_dislike = 0;
    {
        auto fields = split_fields(
            detail::expect_prefix(reader.take("header"), "counts ", "counts"), ' ');
        if (fields.size() != 6) throw DataError("malformed counts line in model file");
        n_users = detail::parse_count(fields[0], "user count");
        n_items = detail::parse_count(fields[1], "item count");
        n_ratings = detail::parse_count(fields[2], "rating count");
        n_plain = detail::parse_count(fields[3], "pair count");
        n_like = detail::parse_count(fields[4], "pair count");
        n_dislike = detail::parse_count(fields[5], "pair count");
    }

    Interner items;
    for (std::uint64_t i = 0; i < n_items; ++i)
        items.intern(detail::expect_prefix(reader.take("item dictionary"), "item ", "item"));
    if (items.size() != n_items)
        throw DataError("duplicate names in the model's item dictionary");
    Interner users;
    for (std::uint64_t i = 0; i < n_users; ++i)
        users.intern(detail::expect_prefix(reader.take("user dictionary"), "user ", "user"));
    if (users.size() != n_users)
        throw DataError("duplicate names in the model's user dictionary");

    Dataset dataset(scale);
    if (n_users > 0) dataset.ensure_user(static_cast<user_id>(n_users - 1));
    if (n_items > 0) dataset.ensure_item(static_cast<item_id>(n_items - 1));

    if (reader.take("ratings") != "ratings")
        throw DataError("model file: expected the ratings section");
    for (std::uint64_t i = 0; i < n_ratings; ++i) {
        auto fields = split_fields(reader.take("ratings"), ' ');
        if (fields.size() != 3) throw DataError("malformed rating line in model file");
        auto uid = parse_uint(fields[0]);
        auto iid = parse_uint(fields[1]);
        auto value = parse_double(fields[2]);
        if (!uid || !iid || !value) throw DataError("malformed rating line in model file");
        if (*uid >= n_users || *iid >= n_items)
            throw DataError("model rating references an unknown user or item id");
        if (dataset.set_rating(static_cast<user_id>(*uid), static_cast<item_id>(*iid), *value))
            throw DataError("duplicate rating in model file");
    }

    DeviationStore plain;
    BipolarDeviationStore bipolar;
    auto read_pairs = [&](const char* name, std::uint64_t count, auto&& restore) {
        if (reader.take(name) != name)
            throw DataError(std::string("model file: expected the ") + name + " section");
        for (std::uint64_t i = 0; i < count; ++i) {
            auto fields = split_fields(reader.take(name), ' ');
            if (fields.size() != 4)
                throw DataError(std::string("malformed ") + name + " pair line in model file");
            auto lo = parse_uint(fields[0]);
            auto hi = parse_uint(fields[1]);
            auto diff = parse_double(fields[2]);
            auto c = parse_uint(fields[3]);
            if (!lo || !hi || !diff || !c || *lo >= *hi || *c == 0)
                throw DataError(std::string("malformed ") + name + " pair line in model file");
            if (*hi >= n_items)
                throw DataError("model pair references an unknown item id");
            restore(PairRecord{static_cast<item_id>(*lo), static_cast<item_id>(*hi), *diff,
                               static_cast<std::uint32_t>(*c)});
        }
    };
    read_pairs("plain", n_plain, [&](const PairRecord& r) { plain.restore(r); });
    read_pairs("like", n_like, [&](const PairRecord& r) { bipolar.restore_like(r); });
    read_pairs("dislike", n_dislike, [&](const PairRecord& r) { bipolar.restore_dislike(r); });

    if (!reader.done()) throw DataError("unexpected trailing content in model file");

    return TrainedModel::assemble(std::move(dataset), std::move(users), std::move(items),
                                  std::move(plain), std::move(bipolar));
}

inline TrainedModel load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    return load_model(in);
}

}  // namespace slopeone

#endif  // SLOPEONE_DATA_IO_HPP
