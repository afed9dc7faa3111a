// mphp: fit, simulate, test and benchmark periodic Hawkes models from the
// command line. Every subcommand writes its outputs plus a manifest.json into
// the directory given by --out.

#include <mphp/mphp.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct InputFlags {
    std::string path;
    std::size_t min_events{90};
    std::optional<double> horizon;
    bool skip_malformed{false};

    mphp::ParseOptions options() const {
        mphp::ParseOptions opts;
        opts.min_events = min_events;
        opts.horizon = horizon;
        opts.skip_malformed = skip_malformed;
        return opts;
    }

    json to_json() const {
        json j{{"min_events", min_events}, {"skip_malformed", skip_malformed}};
        j["horizon"] = horizon ? json(*horizon) : json(nullptr);
        return j;
    }
};

struct FitFlags {
    double omega{1.0};
    std::vector<double> omega_grid;
    double shape_a{1.0};
    double rate_a{0.0};
    double shape_delta{1.0};
    double rate_delta{0.0};
    std::size_t max_iters{500};
    double tol{1e-6};
    bool whole_week_approx{false};
    bool exact_tail{false};

    mphp::EmConfig config() const {
        mphp::EmConfig cfg;
        cfg.omega = omega;
        cfg.max_iters = max_iters;
        cfg.tol = tol;
        cfg.use_unit_tail = !exact_tail;
        cfg.whole_week_approx = whole_week_approx;
        return cfg;
    }

    mphp::GammaPriors priors(std::size_t types) const {
        return mphp::GammaPriors::uniform(types, mphp::kDaysPerWeek, shape_a, rate_a, shape_delta, rate_delta);
    }

    mphp::FitResult fit(const mphp::EventSequence& seq) const {
        if (omega_grid.empty()) {
            return mphp::fit_map_em(seq, priors(seq.num_types()), config());
        }
        return mphp::select_omega(seq, priors(seq.num_types()), config(), omega_grid);
    }

    json to_json() const {
        return json{{"omega", omega},           {"omega_grid", omega_grid},
                    {"prior_shape_a", shape_a}, {"prior_rate_a", rate_a},
                    {"prior_shape_delta", shape_delta}, {"prior_rate_delta", rate_delta},
                    {"max_iters", max_iters},   {"tol", tol},
                    {"whole_week_approx", whole_week_approx}, {"exact_tail", exact_tail}};
    }
};

void add_input_flags(CLI::App* cmd, InputFlags& in) {
    cmd->add_option("--input,-i", in.path, "event table (CSV/TSV: user,date|t,type)")->required();
    cmd->add_option("--min-events", in.min_events, "drop users with fewer events")->capture_default_str();
    cmd->add_option("--horizon", in.horizon, "observation window end in days (default: last day + 1)");
    cmd->add_flag("--skip-malformed", in.skip_malformed, "skip malformed rows instead of failing");
}

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
    cmd->add_option("--omega", f.omega, "kernel decay rate per day")->capture_default_str();
    cmd->add_option("--omega-grid", f.omega_grid, "candidate decay rates; picks the best likelihood")
        ->delimiter(',');
    cmd->add_option("--prior-shape-a", f.shape_a, "Gamma shape for every excitation entry")->capture_default_str();
    cmd->add_option("--prior-rate-a", f.rate_a, "Gamma rate for every excitation entry")->capture_default_str();
    cmd->add_option("--prior-shape-delta", f.shape_delta, "Gamma shape for the day profile")
        ->capture_default_str();
    cmd->add_option("--prior-rate-delta", f.rate_delta, "Gamma rate for the day profile")->capture_default_str();
    cmd->add_option("--max-iters", f.max_iters, "EM iteration cap")->capture_default_str();
    cmd->add_option("--tol", f.tol, "relative log-posterior tolerance")->capture_default_str();
    cmd->add_flag("--whole-week-approx", f.whole_week_approx, "use T/7 for every day-bucket length");
    cmd->add_flag("--exact-tail", f.exact_tail, "use the exact kernel tail mass in the excitation update");
}

// Output directory plus the manifest that lists every file written into it.
class OutputDir {
public:
    OutputDir(const std::string& dir, std::string command, json config, std::uint64_t seed, std::string input_digest)
        : dir_(dir) {
        fs::create_directories(dir_);
        manifest_.command = std::move(command);
        manifest_.config = std::move(config);
        manifest_.seed = seed;
        manifest_.input_digest = std::move(input_digest);
        manifest_.started = mphp::utc_timestamp();
    }

    [[nodiscard]] std::string run_id() const { return manifest_.run_id(); }

    void write(const std::string& name, const std::string& contents) {
        const fs::path path = dir_ / name;
        fs::create_directories(path.parent_path());
        mphp::write_file_atomic(path, contents);
        std::lock_guard lock(mutex_);
        manifest_.outputs[name] = mphp::hex_digest(contents);
    }

    void finish() {
        manifest_.finished = mphp::utc_timestamp();
        mphp::write_file_atomic(dir_ / "manifest.json", manifest_.format());
    }

private:
    fs::path dir_;
    mphp::RunManifest manifest_;
    std::mutex mutex_;
};

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') {
            out += '"';
        }
    }
    return out + "\"";
}

// File-system-safe name for a user id; a digest suffix keeps distinct ids apart.
std::string file_stem(const std::string& user) {
    std::string stem;
    for (char c : user) {
        const bool safe = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '_' || c == '.';
        stem += safe ? c : '_';
    }
    if (stem != user || stem.empty() || stem.front() == '.') {
        stem += "-" + mphp::hex_digest(user).substr(0, 8);
    }
    return stem;
}

// Runs job(k) for k in [0, n) on up to `workers` threads. Library errors are
// collected per index; anything else is rethrown after all workers finish.
template <typename Job>
std::vector<std::optional<mphp::Error>> run_parallel(std::size_t n, std::size_t workers, Job&& job) {
    std::vector<std::optional<mphp::Error>> errors(n);
    std::exception_ptr fatal;
    std::mutex fatal_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < n; k = next++) {
            try {
                job(k);
            } catch (const mphp::Error& e) {
                errors[k] = e;
            } catch (...) {
                std::lock_guard lock(fatal_mutex);
                if (!fatal) {
                    fatal = std::current_exception();
                }
            }
        }
    };
    const std::size_t count = std::max<std::size_t>(1, std::min(workers, n));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < count; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }
    return errors;
}

struct Corpus {
    mphp::ParsedEvents parsed;
    std::vector<std::string> user_ids;
    std::vector<const mphp::EventSequence*> sequences;
    std::string digest;
};

Corpus load_corpus(const InputFlags& in) {
    Corpus c;
    const std::string text = mphp::read_file(in.path);
    c.digest = mphp::hex_digest(text);
    c.parsed = mphp::parse_events_text(text, in.options());
    for (const auto& [user, seq] : c.parsed.users) {
        c.user_ids.push_back(user);
        c.sequences.push_back(&seq);
    }
    if (c.user_ids.empty()) {
        throw mphp::InputError("no user has at least " + std::to_string(in.min_events) + " events");
    }
    for (const auto& issue : c.parsed.issues) {
        std::fprintf(stderr, "warning: skipped line %zu: %s\n", issue.line, issue.message.c_str());
    }
    if (c.parsed.excluded_users > 0) {
        std::fprintf(stderr, "note: %zu user(s) below --min-events excluded\n", c.parsed.excluded_users);
    }
    return c;
}

std::string type_label(const mphp::Vocabulary& vocab, std::size_t type) {
    return type < vocab.size() ? vocab.label(type) : std::to_string(type);
}

std::string vocabulary_csv(const mphp::Vocabulary& vocab) {
    std::string out = "index,label\n";
    for (std::size_t k = 0; k < vocab.size(); ++k) {
        out += std::to_string(k) + "," + csv_field(vocab.label(k)) + "\n";
    }
    return out;
}

// Writes failures.csv and returns the one-line summary error, if any.
void report_failures(OutputDir& out, const std::vector<std::string>& users,
                     const std::vector<std::optional<mphp::Error>>& errors, const std::string& what) {
    std::string csv = "user,category,message\n";
    std::size_t failed = 0;
    std::string category;
    for (std::size_t k = 0; k < errors.size(); ++k) {
        if (errors[k]) {
            ++failed;
            category = errors[k]->category();
            csv += csv_field(users[k]) + "," + errors[k]->category() + "," + csv_field(errors[k]->what()) + "\n";
        }
    }
    if (failed > 0) {
        out.write("failures.csv", csv);
        out.finish();
        throw mphp::Error(category, std::to_string(failed) + " of " + std::to_string(errors.size()) + " " + what +
                                        " failed; see failures.csv");
    }
}

// ---------------------------------------------------------------------------

void run_fit(const InputFlags& in, const FitFlags& ff, const std::string& out_dir, std::uint64_t seed,
             std::size_t workers) {
    const Corpus corpus = load_corpus(in);
    json config{{"input", in.to_json()}, {"fit", ff.to_json()}};
    OutputDir out(out_dir, "fit", config, seed, corpus.digest);
    const auto& vocab = corpus.parsed.vocabulary;
    std::vector<std::string> summary(corpus.user_ids.size());
    const auto errors = run_parallel(corpus.user_ids.size(), workers, [&](std::size_t k) {
        const auto& user = corpus.user_ids[k];
        const auto& seq = *corpus.sequences[k];
        mphp::SavedFit saved{user, out.run_id(), vocab.labels(), seq.horizon(), ff.fit(seq)};
        const std::string stem = file_stem(user);
        out.write("fits/" + stem + ".json", mphp::format_fit(saved));
        out.write("branching/" + stem + ".csv", mphp::format_branching_csv(saved.fit.branching));
        const auto& p = saved.fit.params;
        summary[k] = csv_field(user) + "," + std::to_string(seq.size()) + "," + mphp::format_double(p.omega) + "," +
                     std::to_string(saved.fit.iterations) + "," + (saved.fit.converged ? "1" : "0") + "," +
                     mphp::format_double(saved.fit.trace.back()) + "," +
                     mphp::format_double(mphp::spectral_radius(p.excitation)) + "\n";
    });
    std::string table = "user,events,omega,iterations,converged,log_posterior,spectral_radius\n";
    for (std::size_t k = 0; k < summary.size(); ++k) {
        if (!errors[k]) {
            table += summary[k];
        }
    }
    out.write("summary.csv", table);
    out.write("vocabulary.csv", vocabulary_csv(vocab));
    report_failures(out, corpus.user_ids, errors, "user fit(s)");
    out.finish();
}

struct SimulateFlags {
    std::string fit_path;
    std::vector<double> mu;
    std::string alpha;   // rows separated by ';', entries by ','
    std::vector<double> delta;
    double omega{1.0};
    double horizon{0.0};
    std::size_t users{0};
};

mphp::SquareMatrix parse_matrix(const std::string& text, std::size_t n) {
    std::vector<std::vector<double>> rows;
    std::stringstream all(text);
    std::string row_text;
    while (std::getline(all, row_text, ';')) {
        std::vector<double> row;
        std::stringstream rs(row_text);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            const auto first = cell.find_first_not_of(' ');
            const auto value = mphp::detail::parse_real(first == std::string::npos ? "" : cell.substr(first));
            if (!value) {
                throw mphp::InputError("--alpha entry '" + cell + "' is not a number");
            }
            row.push_back(*value);
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() != n) {
        throw mphp::InputError("--alpha needs " + std::to_string(n) + " rows separated by ';'");
    }
    return mphp::SquareMatrix::from_rows(rows);
}

void run_simulate(const SimulateFlags& sf, const std::string& out_dir, std::uint64_t seed) {
    mphp::MphpParams params;
    std::vector<std::string> labels;
    std::string input_digest;
    if (!sf.fit_path.empty()) {
        const std::string text = mphp::read_file(sf.fit_path);
        input_digest = mphp::hex_digest(text);
        const auto saved = mphp::parse_fit(text);
        params = saved.fit.params;
        labels = saved.vocabulary;
    } else {
        if (sf.mu.empty()) {
            throw mphp::InputError("simulate needs --fit or --mu");
        }
        params = mphp::MphpParams::poisson(sf.mu, mphp::kDaysPerWeek, sf.omega);
        if (!sf.alpha.empty()) {
            params.excitation = parse_matrix(sf.alpha, sf.mu.size());
        }
        if (!sf.delta.empty()) {
            if (sf.delta.size() != mphp::kDaysPerWeek) {
                throw mphp::InputError("--delta needs 7 values");
            }
            params.delta = mphp::normalize_delta(sf.delta);
        }
    }
    if (!(sf.horizon > 0.0)) {
        throw mphp::InputError("--horizon must be positive");
    }
    json config{{"fit", sf.fit_path}, {"mu", params.mu},           {"delta", params.delta},
                {"omega", params.omega}, {"horizon", sf.horizon}, {"users", sf.users}};
    json rows = json::array();
    for (std::size_t r = 0; r < params.excitation.size(); ++r) {
        const auto row = params.excitation.row(r);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    config["excitation"] = rows;
    OutputDir out(out_dir, "simulate", config, seed, input_digest);
    const mphp::Vocabulary vocab(labels);
    const mphp::Vocabulary* named = labels.empty() ? nullptr : &vocab;
    if (sf.users == 0) {
        out.write("events.csv", mphp::format_events_csv(mphp::simulate(params, sf.horizon, seed), named));
    } else {
        std::string csv = "user,t,type\n";
        for (std::size_t k = 0; k < sf.users; ++k) {
            const auto seq = mphp::simulate(params, sf.horizon, mphp::derive_seed(seed, k));
            const std::string user = "u" + std::to_string(k);
            const std::string body = mphp::format_events_csv(seq, named, &user);
            csv += body.substr(body.find('\n') + 1);
        }
        out.write("events.csv", csv);
    }
    out.finish();
}

struct GofFlags {
    std::string model{"mphp"};
    std::size_t reps{20};
    std::string comparison{"rank-sum"};
};

void run_gof(const InputFlags& in, const FitFlags& ff, const GofFlags& gf, const std::string& out_dir,
             std::uint64_t seed, std::size_t workers) {
    const Corpus corpus = load_corpus(in);
    json config{{"input", in.to_json()}, {"fit", ff.to_json()}, {"model", gf.model}, {"mc_reps", gf.reps},
                {"comparison", gf.comparison}};
    OutputDir out(out_dir, "gof", config, seed, corpus.digest);
    mphp::GofOptions opts;
    opts.comparison = gf.comparison == "rank-sum" ? mphp::GroupComparison::rank_sum
                                                  : mphp::GroupComparison::mean_permutation;
    std::vector<mphp::GofResult> results(corpus.user_ids.size());
    const auto errors = run_parallel(corpus.user_ids.size(), workers, [&](std::size_t k) {
        const auto& seq = *corpus.sequences[k];
        const std::uint64_t user_seed = mphp::derive_seed(seed, k);
        if (gf.model == "mphp") {
            auto fitter = [&ff](const mphp::EventSequence& s) { return ff.fit(s).params; };
            results[k] = mphp::mc_gof_test(seq, fitter, mphp::mphp_simulator(), gf.reps, user_seed, opts);
        } else {
            const auto cmp = ff.config().compensator();
            results[k] = mphp::mc_gof_test(seq, mphp::mpp_fitter(mphp::kDaysPerWeek, cmp), mphp::mpp_simulator(),
                                           gf.reps, user_seed, opts);
        }
    });
    std::string table = "user,p_value,rejected,M\n";
    std::string areas = "user,replicate,model_area,null_area\n";
    for (std::size_t k = 0; k < results.size(); ++k) {
        if (errors[k]) {
            continue;
        }
        const auto& r = results[k];
        const std::string user = csv_field(corpus.user_ids[k]);
        table += user + "," + mphp::format_double(r.p_value) + "," + (r.rejected_at_5pct ? "1" : "0") + "," +
                 std::to_string(r.replicates) + "\n";
        for (std::size_t m = 0; m < r.model_areas.size(); ++m) {
            areas += user + "," + std::to_string(m) + "," + mphp::format_double(r.model_areas[m]) + "," +
                     mphp::format_double(r.null_areas[m]) + "\n";
        }
    }
    out.write("gof.csv", table);
    out.write("gof_areas.csv", areas);
    report_failures(out, corpus.user_ids, errors, "goodness-of-fit test(s)");
    out.finish();
}

struct PredictFlags {
    double epsilon{2.0};
    double holdout{0.10};
    std::size_t top_k{10};
    std::size_t samples{1000};
    std::vector<std::string> models{"mphp", "mpp"};
};

void run_predict(const InputFlags& in, const FitFlags& ff, const PredictFlags& pf, const std::string& out_dir,
                 std::uint64_t seed, std::size_t workers) {
    if (!ff.omega_grid.empty()) {
        throw mphp::InputError("predict uses a single --omega");
    }
    const Corpus corpus = load_corpus(in);
    json config{{"input", in.to_json()}, {"fit", ff.to_json()},   {"epsilon", pf.epsilon},
                {"holdout", pf.holdout}, {"top_k_types", pf.top_k}, {"samples", pf.samples},
                {"models", pf.models}};
    OutputDir out(out_dir, "predict", config, seed, corpus.digest);
    std::vector<mphp::PredictionModel> models;
    for (const auto& name : pf.models) {
        if (name == "mphp") {
            const std::size_t samples = pf.samples;
            models.push_back({"mphp", [ff, samples](const mphp::EventSequence& train, double t, double epsilon,
                                                    std::uint64_t model_seed) {
                                  const auto params = ff.fit(train).params;
                                  return mphp::predict_window_probabilities(params, train, t, epsilon, samples,
                                                                            model_seed);
                              }});
        } else {
            models.push_back(mphp::mpp_prediction_model());
        }
    }
    std::vector<mphp::EventSequence> users;
    for (const auto* seq : corpus.sequences) {
        users.push_back(*seq);
    }
    mphp::BenchmarkConfig cfg;
    cfg.epsilon = pf.epsilon;
    cfg.holdout = pf.holdout;
    cfg.top_k = pf.top_k;
    cfg.seed = seed;
    cfg.workers = workers;
    const auto result = mphp::prediction_benchmark(users, models, cfg);
    const auto& vocab = corpus.parsed.vocabulary;

    std::string ap = "model,type,average_precision,positives,total\n";
    for (const auto& [model, per_type] : result.curves) {
        std::string pr = "type,threshold,precision,recall\n";
        for (std::size_t type : result.tracked_types) {
            const auto it = per_type.find(type);
            if (it == per_type.end()) {
                continue;
            }
            const std::string label = csv_field(type_label(vocab, type));
            for (const auto& point : it->second.points) {
                pr += label + "," + mphp::format_double(point.threshold) + "," +
                      mphp::format_double(point.precision) + "," + mphp::format_double(point.recall) + "\n";
            }
            ap += model + "," + label + "," + mphp::format_double(it->second.average_precision) + "," +
                  std::to_string(it->second.positives) + "," + std::to_string(it->second.total) + "\n";
        }
        out.write("pr_" + model + ".csv", pr);
    }
    out.write("average_precision.csv", ap);
    std::string scores = "user,model,type,cutoff,score,label\n";
    for (const auto& s : result.scores) {
        scores += csv_field(corpus.user_ids[s.user]) + "," + s.model + "," + csv_field(type_label(vocab, s.type)) +
                  "," + mphp::format_double(result.cutoffs[s.user]) + "," + mphp::format_double(s.score) + "," +
                  (s.label ? "1" : "0") + "\n";
    }
    out.write("scores.csv", scores);
    out.write("skipped.csv", "reason,users\nno_history," + std::to_string(result.skipped_no_history) +
                                 "\nfit_failure," + std::to_string(result.skipped_fit_failures) + "\n");
    out.finish();
}

void run_cooccur(const InputFlags& in, const FitFlags& ff, const std::string& out_dir, std::uint64_t seed,
                 std::size_t workers) {
    const Corpus corpus = load_corpus(in);
    json config{{"input", in.to_json()}, {"fit", ff.to_json()}};
    OutputDir out(out_dir, "cooccur", config, seed, corpus.digest);
    const std::size_t u = corpus.parsed.vocabulary.size();
    std::vector<mphp::SquareMatrix> counts(corpus.user_ids.size());
    std::vector<mphp::SquareMatrix> fitted(corpus.user_ids.size());
    const auto errors = run_parallel(corpus.user_ids.size(), workers, [&](std::size_t k) {
        counts[k] = mphp::same_day_cooccurrence(*corpus.sequences[k]);
        fitted[k] = ff.fit(*corpus.sequences[k]).params.excitation;
    });
    const auto& vocab = corpus.parsed.vocabulary;
    std::string table = "user,parent_type,child_type,cooccurrence_days,excitation\n";
    mphp::SquareMatrix total_counts(u);
    mphp::SquareMatrix mean_excitation(u);
    std::size_t fitted_users = 0;
    for (std::size_t k = 0; k < corpus.user_ids.size(); ++k) {
        if (errors[k]) {
            continue;
        }
        ++fitted_users;
        for (std::size_t a = 0; a < u; ++a) {
            for (std::size_t b = 0; b < u; ++b) {
                total_counts(a, b) += counts[k](a, b);
                mean_excitation(a, b) += fitted[k](a, b);
                table += csv_field(corpus.user_ids[k]) + "," + csv_field(type_label(vocab, a)) + "," +
                         csv_field(type_label(vocab, b)) + "," + mphp::format_double(counts[k](a, b)) + "," +
                         mphp::format_double(fitted[k](a, b)) + "\n";
            }
        }
    }
    std::string pooled = "parent_type,child_type,cooccurrence_days,mean_excitation\n";
    for (std::size_t a = 0; a < u; ++a) {
        for (std::size_t b = 0; b < u; ++b) {
            const double mean = fitted_users > 0 ? mean_excitation(a, b) / static_cast<double>(fitted_users) : 0.0;
            pooled += csv_field(type_label(vocab, a)) + "," + csv_field(type_label(vocab, b)) + "," +
                      mphp::format_double(total_counts(a, b)) + "," + mphp::format_double(mean) + "\n";
        }
    }
    out.write("cooccur.csv", table);
    out.write("cooccur_pooled.csv", pooled);
    report_failures(out, corpus.user_ids, errors, "user fit(s)");
    out.finish();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multivariate periodic Hawkes process toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mphp::kLibraryVersion));

    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    InputFlags in;
    FitFlags ff;
    SimulateFlags sf;
    GofFlags gf;
    PredictFlags pf;

    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--out,-o", out_dir, "output directory")->required();
        cmd->add_option("--seed", seed, "base random seed")->capture_default_str();
    };
    auto parallel = [&](CLI::App* cmd) {
        cmd->add_option("--workers", workers, "worker threads over users")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
    };

    auto* fit = app.add_subcommand("fit", "MAP-EM fit per user, with branching tables");
    add_input_flags(fit, in);
    add_fit_flags(fit, ff);
    common(fit);
    parallel(fit);

    auto* sim = app.add_subcommand("simulate", "sample an event sequence");
    sim->add_option("--fit", sf.fit_path, "fit file to simulate from");
    sim->add_option("--mu", sf.mu, "background rates, comma separated")->delimiter(',');
    sim->add_option("--alpha", sf.alpha, "excitation rows (parent type) as 'a,b;c,d'");
    sim->add_option("--delta", sf.delta, "7 day-of-week multipliers")->delimiter(',');
    sim->add_option("--omega", sf.omega, "kernel decay rate per day")->capture_default_str();
    sim->add_option("--horizon", sf.horizon, "window length in days")->required();
    sim->add_option("--users", sf.users, "simulate this many independent users (user,t,type output)");
    common(sim);

    auto* gof = app.add_subcommand("gof", "Monte Carlo goodness-of-fit test per user");
    add_input_flags(gof, in);
    add_fit_flags(gof, ff);
    gof->add_option("--model", gf.model, "model under test")
        ->capture_default_str()
        ->check(CLI::IsMember({"mphp", "mpp"}));
    gof->add_option("--mc-reps", gf.reps, "Monte Carlo replicates (at least 20)")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{20}, std::numeric_limits<std::size_t>::max()));
    gof->add_option("--comparison", gf.comparison, "group comparison")
        ->capture_default_str()
        ->check(CLI::IsMember({"rank-sum", "mean-permutation"}));
    common(gof);
    parallel(gof);

    auto* pred = app.add_subcommand("predict", "next-window activity prediction benchmark");
    add_input_flags(pred, in);
    add_fit_flags(pred, ff);
    pred->add_option("--epsilon", pf.epsilon, "window length in days")->capture_default_str();
    pred->add_option("--holdout", pf.holdout, "fraction of the history the cutoff is drawn from")
        ->capture_default_str();
    pred->add_option("--top-k-types", pf.top_k, "score the most common types only")->capture_default_str();
    pred->add_option("--samples", pf.samples, "continuations per prediction")->capture_default_str();
    pred->add_option("--models", pf.models, "models to compare")
        ->delimiter(',')
        ->capture_default_str()
        ->check(CLI::IsMember({"mphp", "mpp"}));
    common(pred);
    parallel(pred);

    auto* co = app.add_subcommand("cooccur", "same-day co-occurrence against fitted excitation");
    add_input_flags(co, in);
    add_fit_flags(co, ff);
    common(co);
    parallel(co);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 2;
    }

    try {
        if (*fit) {
            run_fit(in, ff, out_dir, seed, workers);
        } else if (*sim) {
            run_simulate(sf, out_dir, seed);
        } else if (*gof) {
            run_gof(in, ff, gf, out_dir, seed, workers);
        } else if (*pred) {
            run_predict(in, ff, pf, out_dir, seed, workers);
        } else if (*co) {
            run_cooccur(in, ff, out_dir, seed, workers);
        }
    } catch (const mphp::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.category().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: io: %s\n", e.what());
        return 1;
    }
    return 0;
}
