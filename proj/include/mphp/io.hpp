#pragma once

#include <mphp/error.hpp>
#include <mphp/estimation.hpp>
#include <mphp/events.hpp>
#include <mphp/model.hpp>
#include <mphp/params.hpp>

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mphp {

inline constexpr std::string_view kLibraryVersion = "1.0.0";
inline constexpr int kFitFormatVersion = 1;

// ---------------------------------------------------------------------------
// Digests

[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view bytes,
                                           std::uint64_t hash = 0xcbf29ce484222325ULL) noexcept {
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

[[nodiscard]] inline std::string hex_digest(std::string_view bytes) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes);
    return out.str();
}

[[nodiscard]] inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

// Writes through a temporary file and a rename so readers never see a
// partially written output.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InputError("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw InputError("failed writing " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

// Shortest decimal text that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Vocabulary

// Type labels -> dense indices, assigned by first appearance.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> labels) {
        for (auto& l : labels) {
            add(l);
        }
    }

    std::size_t add(const std::string& label) {
        const auto [it, inserted] = index_.try_emplace(label, labels_.size());
        if (inserted) {
            labels_.push_back(label);
        }
        return it->second;
    }

    [[nodiscard]] std::optional<std::size_t> find(const std::string& label) const {
        const auto it = index_.find(label);
        return it == index_.end() ? std::nullopt : std::optional<std::size_t>(it->second);
    }

    [[nodiscard]] const std::string& label(std::size_t i) const { return labels_.at(i); }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Event tables

struct ParseOptions {
    std::size_t min_events{90};
    std::optional<double> horizon;       // overrides max day + 1
    std::string default_user{"user"};    // used when the table has no user column
    bool skip_malformed{false};          // otherwise any malformed row is an error
};

struct ParseIssue {
    std::size_t line{0};
    std::string message;
};

struct ParsedEvents {
    std::map<std::string, EventSequence> users;   // ordered by user id
    Vocabulary vocabulary;
    std::vector<ParseIssue> issues;
    std::size_t excluded_users{0};                 // below min_events
    std::optional<std::string> origin_date;        // day 0 when dates were given
    double horizon{0.0};
};

namespace detail {

inline std::vector<std::string> split_row(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
                field += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(std::move(field));
    for (auto& f : out) {
        const auto first = f.find_first_not_of(" \t\r");
        const auto last = f.find_last_not_of(" \t\r");
        f = first == std::string::npos ? std::string{} : f.substr(first, last - first + 1);
    }
    return out;
}

// Days since 1970-01-01 for an ISO-8601 calendar date (YYYY-MM-DD, optionally
// followed by a time part, which is ignored at day granularity).
inline std::optional<long long> parse_iso_date(std::string_view text) {
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        const auto res = std::from_chars(text.data() + pos, text.data() + pos + len, out);
        return res.ec == std::errc{} && res.ptr == text.data() + pos + len;
    };
    if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) {
        return std::nullopt;
    }
    if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return std::chrono::sys_days{ymd}.time_since_epoch().count();
}

inline std::string format_iso_date(long long days) {
    const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
    std::ostringstream out;
    out << std::setfill('0') << std::setw(4) << static_cast<int>(ymd.year()) << '-' << std::setw(2)
        << static_cast<unsigned>(ymd.month()) << '-' << std::setw(2) << static_cast<unsigned>(ymd.day());
    return out.str();
}

inline std::optional<double> parse_real(std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

} // namespace detail

// Parses a CSV/TSV event table with header `user,date,type`, `user,t,type`,
// or the single-user forms `date,type` / `t,type`.
[[nodiscard]] inline ParsedEvents parse_events_text(std::string_view text, const ParseOptions& opts = {},
                                                    Vocabulary vocabulary = {}) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) {
            break;
        }
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
        throw InputError("event table is empty");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
        line.erase(0, 3);   // UTF-8 byte order mark
    }
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    const auto header = detail::split_row(line, delim);
    auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        return it == header.end() ? std::nullopt : std::optional<std::size_t>(it - header.begin());
    };
    const auto user_col = column("user");
    const auto date_col = column("date");
    const auto time_col = column("t");
    const auto type_col = column("type");
    if (!type_col || (!date_col && !time_col)) {
        throw InputError("line " + std::to_string(line_no) +
                         ": header must name columns type and date or t (optionally user)");
    }
    const bool use_dates = date_col.has_value();
    const std::size_t time_index = use_dates ? *date_col : *time_col;

    struct Row {
        std::string user;
        double raw_time;
        std::size_t type;
    };
    std::vector<Row> rows;
    ParsedEvents parsed;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto fields = detail::split_row(line, delim);
        auto issue = [&](std::string msg) {
            parsed.issues.push_back(ParseIssue{line_no, std::move(msg)});
        };
        if (fields.size() != header.size()) {
            issue("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
            continue;
        }
        const std::string& time_text = fields[time_index];
        double raw = 0.0;
        if (use_dates) {
            const auto days = detail::parse_iso_date(time_text);
            if (!days) {
                issue("unparseable date '" + time_text + "'");
                continue;
            }
            raw = static_cast<double>(*days);
        } else {
            const auto t = detail::parse_real(time_text);
            if (!t || *t < 0.0) {
                issue("time '" + time_text + "' is not a non-negative number");
                continue;
            }
            raw = *t;
        }
        if (fields[*type_col].empty()) {
            issue("empty type label");
            continue;
        }
        std::string user = user_col ? fields[*user_col] : opts.default_user;
        if (user.empty()) {
            issue("empty user id");
            continue;
        }
        rows.push_back(Row{std::move(user), raw, vocabulary.add(fields[*type_col])});
    }
    if (!parsed.issues.empty() && !opts.skip_malformed) {
        std::string report = std::to_string(parsed.issues.size()) + " malformed row(s)";
        for (std::size_t k = 0; k < std::min<std::size_t>(parsed.issues.size(), 10); ++k) {
            report += "; line " + std::to_string(parsed.issues[k].line) + ": " + parsed.issues[k].message;
        }
        throw InputError(report);
    }
    if (rows.empty()) {
        throw InputError("event table has no data rows");
    }

    double origin = 0.0;
    if (use_dates) {
        origin = std::min_element(rows.begin(), rows.end(),
                                  [](const Row& a, const Row& b) { return a.raw_time < b.raw_time; })
                     ->raw_time;
        parsed.origin_date = detail::format_iso_date(static_cast<long long>(origin));
    }
    double max_time = 0.0;
    std::map<std::string, std::vector<Event>> grouped;
    for (const auto& r : rows) {
        const double t = r.raw_time - origin;
        max_time = std::max(max_time, t);
        grouped[r.user].push_back(Event{t, r.type});
    }
    parsed.horizon = opts.horizon ? *opts.horizon : std::floor(max_time) + 1.0;
    if (parsed.horizon < max_time) {
        throw InputError("horizon override ends before the last event");
    }
    for (auto& [user, events] : grouped) {
        if (events.size() < opts.min_events) {
            ++parsed.excluded_users;
            continue;
        }
        parsed.users.emplace(user, EventSequence::from_unsorted(std::move(events), parsed.horizon,
                                                                std::max<std::size_t>(1, vocabulary.size())));
    }
    parsed.vocabulary = std::move(vocabulary);
    return parsed;
}

[[nodiscard]] inline ParsedEvents parse_events(const std::filesystem::path& path, const ParseOptions& opts = {},
                                               Vocabulary vocabulary = {}) {
    return parse_events_text(read_file(path), opts, std::move(vocabulary));
}

// `t,type` (or `user,t,type` when a user id is given) with round-trip precision.
[[nodiscard]] inline std::string format_events_csv(const EventSequence& seq, const Vocabulary* vocabulary = nullptr,
                                                   const std::string* user = nullptr) {
    std::string out = user ? "user,t,type\n" : "t,type\n";
    for (const auto& e : seq) {
        if (user) {
            out += *user + ",";
        }
        out += format_double(e.t) + ",";
        out += vocabulary && e.type < vocabulary->size() ? vocabulary->label(e.type) : std::to_string(e.type);
        out += '\n';
    }
    return out;
}

// event,parent,probability rows; parent is SELF for the background share.
[[nodiscard]] inline std::string format_branching_csv(const BranchingEstimate& branching) {
    std::string out = "event,parent,probability\n";
    for (std::size_t i = 0; i < branching.size(); ++i) {
        out += std::to_string(i) + ",SELF," + format_double(branching.background(i)) + "\n";
        const auto ps = branching.parents(i);
        const auto pr = branching.probabilities(i);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            out += std::to_string(i) + "," + std::to_string(ps[k]) + "," + format_double(pr[k]) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fit files
//
// JSON document:
//   format "mphp-fit", version, user, manifest, vocabulary, num_days, omega,
//   mu, delta, excitation (rows = parent type), horizon, trace, converged,
//   iterations, clipped, branching {background, parents, probabilities},
//   checksum = FNV-1a 64 of the compact dump of every other field.

struct SavedFit {
    std::string user;
    std::string manifest_id;
    std::vector<std::string> vocabulary;
    double horizon{0.0};
    FitResult fit;
};

namespace detail {

inline nlohmann::json fit_payload(const SavedFit& saved) {
    using nlohmann::json;
    const auto& p = saved.fit.params;
    json excitation = json::array();
    for (std::size_t r = 0; r < p.excitation.size(); ++r) {
        const auto row = p.excitation.row(r);
        excitation.push_back(std::vector<double>(row.begin(), row.end()));
    }
    json background = json::array();
    json parents = json::array();
    json probabilities = json::array();
    const auto& b = saved.fit.branching;
    for (std::size_t i = 0; i < b.size(); ++i) {
        background.push_back(b.background(i));
        const auto ps = b.parents(i);
        const auto pr = b.probabilities(i);
        parents.push_back(std::vector<std::size_t>(ps.begin(), ps.end()));
        probabilities.push_back(std::vector<double>(pr.begin(), pr.end()));
    }
    return json{
        {"format", "mphp-fit"},
        {"version", kFitFormatVersion},
        {"user", saved.user},
        {"manifest", saved.manifest_id},
        {"vocabulary", saved.vocabulary},
        {"num_days", p.num_days()},
        {"omega", p.omega},
        {"mu", p.mu},
        {"delta", p.delta},
        {"excitation", excitation},
        {"horizon", saved.horizon},
        {"trace", saved.fit.trace},
        {"converged", saved.fit.converged},
        {"iterations", saved.fit.iterations},
        {"clipped", saved.fit.clipped},
        {"branching", json{{"background", background}, {"parents", parents}, {"probabilities", probabilities}}},
    };
}

} // namespace detail

[[nodiscard]] inline std::string format_fit(const SavedFit& saved) {
    auto doc = detail::fit_payload(saved);
    doc["checksum"] = hex_digest(doc.dump());
    return doc.dump(1) + "\n";
}

[[nodiscard]] inline SavedFit parse_fit(std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception&) {
        throw LoadError("checksum failure: fit file is truncated or corrupt");
    }
    if (!doc.is_object() || doc.value("format", "") != "mphp-fit") {
        throw LoadError("not an mphp fit file");
    }
    if (!doc.contains("version") || doc["version"] != kFitFormatVersion) {
        throw LoadError("unsupported fit file version " + (doc.contains("version") ? doc["version"].dump() : "?"));
    }
    if (!doc.contains("checksum")) {
        throw LoadError("checksum failure: missing checksum");
    }
    const std::string checksum = doc["checksum"].get<std::string>();
    doc.erase("checksum");
    if (hex_digest(doc.dump()) != checksum) {
        throw LoadError("checksum failure: contents do not match the recorded checksum");
    }
    try {
        SavedFit saved;
        saved.user = doc.at("user").get<std::string>();
        saved.manifest_id = doc.at("manifest").get<std::string>();
        saved.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
        saved.horizon = doc.at("horizon").get<double>();
        auto& p = saved.fit.params;
        p.omega = doc.at("omega").get<double>();
        p.mu = doc.at("mu").get<std::vector<double>>();
        p.delta = doc.at("delta").get<std::vector<double>>();
        p.excitation = SquareMatrix::from_rows(doc.at("excitation").get<std::vector<std::vector<double>>>());
        if (p.delta.size() != doc.at("num_days").get<std::size_t>()) {
            throw LoadError("num_days disagrees with the day profile");
        }
        p.validate();
        saved.fit.trace = doc.at("trace").get<std::vector<double>>();
        saved.fit.converged = doc.at("converged").get<bool>();
        saved.fit.iterations = doc.at("iterations").get<std::size_t>();
        saved.fit.clipped = doc.at("clipped").get<std::size_t>();
        const auto& br = doc.at("branching");
        const auto background = br.at("background").get<std::vector<double>>();
        const auto parents = br.at("parents").get<std::vector<std::vector<std::size_t>>>();
        const auto probabilities = br.at("probabilities").get<std::vector<std::vector<double>>>();
        if (parents.size() != background.size() || probabilities.size() != background.size()) {
            throw LoadError("branching arrays disagree in length");
        }
        for (std::size_t i = 0; i < background.size(); ++i) {
            saved.fit.branching.add_row(background[i], parents[i], probabilities[i]);
        }
        return saved;
    } catch (const json::exception& e) {
        throw LoadError(std::string("malformed fit file: ") + e.what());
    } catch (const InputError& e) {
        throw LoadError(std::string("invalid parameters in fit file: ") + e.what());
    }
}

inline void save_fit(const SavedFit& saved, const std::filesystem::path& path) {
    write_file_atomic(path, format_fit(saved));
}

[[nodiscard]] inline SavedFit load_fit(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_fit(buffer.str());
}

// ---------------------------------------------------------------------------
// Run manifests

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed{0};
    std::string input_digest;
    std::string started;
    std::string finished;
    std::map<std::string, std::string> outputs;   // file name -> digest

    // Depends only on command, config, seed and input, so reruns share it.
    [[nodiscard]] std::string run_id() const {
        return hex_digest(command + "|" + config.dump() + "|" + std::to_string(seed) + "|" + input_digest);
    }

    [[nodiscard]] std::string format() const {
        nlohmann::json doc{
            {"run_id", run_id()},
            {"command", command},
            {"config", config},
            {"seed", seed},
            {"input_digest", input_digest},
            {"library_version", std::string(kLibraryVersion)},
            {"started", started},
            {"finished", finished},
            {"outputs", outputs},
        };
        return doc.dump(1) + "\n";
    }
};

[[nodiscard]] inline std::string utc_timestamp() {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    const auto day = std::chrono::floor<std::chrono::days>(now);
    const std::chrono::hh_mm_ss hms{now - day};
    std::ostringstream out;
    out << detail::format_iso_date(day.time_since_epoch().count()) << 'T' << std::setfill('0') << std::setw(2)
        << hms.hours().count() << ':' << std::setw(2) << hms.minutes().count() << ':' << std::setw(2)
        << hms.seconds().count() << 'Z';
    return out.str();
}

} // namespace mphp
