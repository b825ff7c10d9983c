#include "mainstreamlab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "mainstreamlab/clustering.hpp"
#include "mainstreamlab/dataset.hpp"
#include "mainstreamlab/diagnostics.hpp"
#include "mainstreamlab/error.hpp"
#include "mainstreamlab/mainstreaminess.hpp"
#include "mainstreamlab/outliers.hpp"
#include "mainstreamlab/popularity.hpp"
#include "mainstreamlab/recsys.hpp"
#include "mainstreamlab/rng.hpp"
#include "mainstreamlab/stats.hpp"

namespace mainstreamlab::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

json config_json(const RunConfig& c) {
  const auto opt = [](const auto& o) -> json { return o ? json(*o) : json(nullptr); };
  return json{
      {"events", c.events},
      {"users", c.users},
      {"seed", c.seed},
      {"min_country_users", c.min_country_users},
      {"min_country_users_recsys", c.min_country_users_recsys},
      {"epsilon", c.epsilon},
      {"leave_one_out", c.leave_one_out},
      {"basis", opt(c.basis)},
      {"scope", opt(c.scope)},
      {"method", opt(c.method)},
      {"country", opt(c.country)},
      {"top_artists", c.top_artists},
      {"window", c.window},
      {"pos_thresh", c.pos_thresh},
      {"neg_thresh", c.neg_thresh},
      {"horizon", c.horizon},
      {"top_outliers", c.top_outliers},
      {"exclude_self", c.exclude_self},
      {"damping", c.damping},
      {"max_iter", c.max_iter},
      {"convergence_iter", c.convergence_iter},
      {"preference", opt(c.preference)},
      {"top_k_features", c.top_k_features},
      {"k", c.k},
      {"lr", c.lr},
      {"reg", c.reg},
      {"epochs", c.epochs},
      {"folds", c.folds},
      {"train_frac", c.train_frac},
      {"rating_scale", c.rating_scale},
      {"cold", c.cold},
      {"validate", c.validate},
      {"subsamples", c.subsamples},
      {"subsample_users", c.subsample_users},
  };
}

// Writes files atomically (temp file + rename) and remembers them so a
// failed run can remove what it produced.
class OutputDir {
 public:
  explicit OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

  const fs::path& root() const { return root_; }
  fs::path path(const std::string& name) const { return root_ / name; }
  bool exists(const std::string& name) const { return fs::exists(path(name)); }

  void write(const std::string& name, const std::string& content) {
    const auto target = path(name);
    const auto tmp = fs::path(target.string() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
      out << content;
      if (!out) throw Error(fmt::format("write failed for '{}'", tmp.string()));
    }
    fs::rename(tmp, target);
    if (std::find(written_.begin(), written_.end(), name) == written_.end()) {
      written_.push_back(name);
    }
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", path(name).string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  const std::vector<std::string>& written() const { return written_; }

  void remove_written() {
    std::error_code ec;
    for (const auto& name : written_) {
      fs::remove(path(name), ec);
      fs::remove(fs::path(path(name).string() + ".tmp"), ec);
    }
    written_.clear();
  }

 private:
  fs::path root_;
  std::vector<std::string> written_;
};

class Pipeline {
 public:
  Pipeline(RunConfig config, OutputDir& out) : config_(std::move(config)), out_(out) {}

  const RunConfig& config() const { return config_; }

  const UserArtistMatrix& matrix() {
    if (!matrix_) {
      if (config_.users.empty() || config_.events.empty()) {
        throw Error("--users and --events are required");
      }
      std::ifstream users_in(config_.users);
      if (!users_in) throw Error(fmt::format("cannot open users file '{}'", config_.users));
      std::ifstream events_in(config_.events);
      if (!events_in) throw Error(fmt::format("cannot open events file '{}'", config_.events));
      const auto users = parse_users(users_in);
      const auto triples = parse_events(events_in);
      raw_ = build_matrix(triples, users, &build_report_);
      matrix_ = filter_by_country_support(raw_, config_.min_country_users);
    }
    return *matrix_;
  }

  const UserArtistMatrix& raw_matrix() {
    matrix();
    return raw_;
  }
  const BuildReport& build_report() {
    matrix();
    return build_report_;
  }

  const MainstreaminessTable& table() {
    if (!table_) {
      if (out_.exists("mainstreaminess.csv")) {
        std::istringstream in(out_.read("mainstreaminess.csv"));
        table_ = MainstreaminessTable::from_csv(in);
      } else {
        table_ = compute_table(matrix(), {config_.epsilon, config_.leave_one_out});
      }
    }
    return *table_;
  }

  std::vector<Basis> bases(bool default_both) const {
    if (config_.basis) return {parse_basis(*config_.basis)};
    if (default_both) return {Basis::kApc, Basis::kAlc};
    return {Basis::kApc};
  }

  std::vector<std::string> countries() {
    if (config_.country) {
      if (!matrix().index().find_country(*config_.country)) {
        throw Error(fmt::format("country '{}' is not in the filtered dataset", *config_.country));
      }
      return {*config_.country};
    }
    return matrix().index().countries;
  }

 private:
  RunConfig config_;
  OutputDir& out_;
  UserArtistMatrix raw_;
  BuildReport build_report_;
  std::optional<UserArtistMatrix> matrix_;
  std::optional<MainstreaminessTable> table_;
};

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void stage_ingest(Pipeline& p, OutputDir& out) {
  const auto& m = p.matrix();
  const auto& report = p.build_report();
  json summary{
      {"users_parsed_with_events", p.raw_matrix().num_users()},
      {"users", m.num_users()},
      {"artists", m.num_artists()},
      {"countries", m.num_countries()},
      {"nonzeros", m.nnz()},
      {"total_playcount", total_playcount(m)},
      {"dropped_triples_unknown_user", report.dropped_triples},
      {"dropped_users_without_events", report.dropped_idle_users},
      {"min_country_users", p.config().min_country_users},
  };
  out.write("dataset_summary.json", summary.dump(2) + "\n");

  std::string csv = "country,n_users\n";
  const auto counts = country_user_counts(m);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    csv += fmt::format("{},{}\n", m.index().countries[c], counts[c]);
  }
  out.write("countries.csv", csv);
}

void stage_popularity(Pipeline& p, OutputDir& out) {
  const auto& m = p.matrix();
  const auto& cfg = p.config();
  for (const auto basis : p.bases(true)) {
    const auto tag = lower(to_string(basis));
    const auto global = profile(m, basis, Scope::global());
    std::string csv = "rank,artist_id,value\n";
    const auto top = top_k(global, cfg.top_artists);
    for (std::size_t i = 0; i < top.size(); ++i) {
      csv += fmt::format("{},{},{}\n", i + 1, top[i].artist, top[i].value);
    }
    out.write(fmt::format("top_artists_{}.csv", tag), csv);

    const auto order = global_rank_order(global, std::min(cfg.horizon, global.size()));
    for (const auto& code : p.countries()) {
      const auto country = profile(m, basis, Scope::of_country(code));
      const auto scaled = scale_global_to_country(global, country);
      out.write(fmt::format("plot_{}_{}.csv", code, tag),
                plot_csv(plot_data(country, scaled, order)));
    }
  }
}

void stage_measures(Pipeline& p, OutputDir& out) {
  const auto table = compute_table(p.matrix(), {p.config().epsilon, p.config().leave_one_out});
  out.write("mainstreaminess.csv", table.to_csv());
}

void stage_stats(Pipeline& p, OutputDir& out) {
  const auto& table = p.table();
  out.write("measure_summary.csv", stats::overall_csv(stats::overall_report(table)));
  const auto report = stats::country_report(table);
  out.write("country_summary.csv", report.to_csv());
  std::string csv = "measure,h,df,p_value\n";
  for (std::size_t m = 0; m < kNumMeasures; ++m) {
    const auto& kw = report.kruskal_wallis[m];
    csv += column_name(all_measures()[m]);
    if (kw) {
      csv += fmt::format(",{},{},{}\n", kw->statistic, *kw->degrees_of_freedom, kw->p_value);
    } else {
      csv += ",,,\n";
    }
  }
  out.write("country_tests.csv", csv);
}

void stage_outliers(Pipeline& p, OutputDir& out) {
  const auto& m = p.matrix();
  const auto& cfg = p.config();
  const OutlierThresholds thresholds{cfg.pos_thresh, cfg.neg_thresh};
  for (const auto basis : p.bases(false)) {
    const auto tag = lower(to_string(basis));
    const auto global = profile(m, basis, Scope::global());
    const auto order = global_rank_order(global, global.size());
    const auto horizon = std::min(cfg.horizon, order.size());
    for (const auto& code : p.countries()) {
      const auto country = profile(m, basis, Scope::of_country(code));
      const auto scaled = scale_global_to_country(global, country);
      SlidingWindowOptions sw{cfg.window, horizon, thresholds, cfg.exclude_self};
      auto sliding = sliding_window_outliers(country, order, sw, &scaled);
      const auto global_diff =
          global_difference_outliers(country, scaled, order, horizon, thresholds, cfg.window);

      auto top = top_outliers(sliding, cfg.top_outliers);
      const auto top_global = top_outliers(global_diff, cfg.top_outliers);
      top.insert(top.end(), top_global.begin(), top_global.end());
      sliding.insert(sliding.end(), global_diff.begin(), global_diff.end());
      out.write(fmt::format("outliers_{}_{}.csv", code, tag), outliers_csv(sliding));
      out.write(fmt::format("outliers_{}_{}_top.csv", code, tag), outliers_csv(top));
    }
  }
}

void stage_cluster(Pipeline& p, OutputDir& out) {
  const auto& cfg = p.config();
  for (const auto basis : p.bases(false)) {
    const auto tag = lower(to_string(basis));
    const auto features = country_features(p.matrix(), basis, cfg.top_k_features);
    if (features.countries.size() < 2) {
      throw Error("clustering needs at least two countries");
    }
    AffinityOptions options{cfg.damping, cfg.max_iter, cfg.convergence_iter, cfg.preference};
    const auto assignment = affinity_propagation(similarity_matrix(features.values), options);
    out.write(fmt::format("clusters_{}.csv", tag), clusters_csv(assignment, features.countries));

    std::string listing = fmt::format("clusters: {}\niterations: {}\nconverged: {}\n",
                                      assignment.num_clusters(), assignment.n_iterations,
                                      assignment.converged ? "yes" : "no");
    for (const auto& g : cluster_report(assignment, features.countries)) {
      listing += fmt::format("{}: {}\n", g.cluster_id, fmt::join(g.members, " "));
    }
    out.write(fmt::format("clusters_{}.txt", tag), listing);
  }
}

recsys::ExperimentOptions experiment_options(const RunConfig& cfg) {
  recsys::ExperimentOptions o;
  o.mf.k = cfg.k;
  o.mf.learning_rate = cfg.lr;
  o.mf.reg = cfg.reg;
  o.mf.epochs = cfg.epochs;
  o.train_frac = cfg.train_frac;
  if (cfg.rating_scale == "normalized") {
    o.scale = recsys::RatingScale::kNormalized;
  } else if (cfg.rating_scale == "raw") {
    o.scale = recsys::RatingScale::kRaw;
  } else {
    throw Error(fmt::format("unknown rating scale '{}'", cfg.rating_scale));
  }
  if (cfg.cold == "zero") {
    o.cold = recsys::ColdPolicy::kPredictZero;
  } else if (cfg.cold == "drop") {
    o.cold = recsys::ColdPolicy::kDrop;
  } else {
    throw Error(fmt::format("unknown cold-start policy '{}'", cfg.cold));
  }
  o.min_country_users = cfg.min_country_users_recsys;
  return o;
}

void stage_recsys(Pipeline& p, OutputDir& out) {
  const auto& cfg = p.config();
  const auto& m = p.matrix();
  const auto& table = p.table();
  auto countries = recsys::eligible_countries(m, cfg.min_country_users_recsys);
  if (cfg.country) {
    if (std::find(countries.begin(), countries.end(), *cfg.country) == countries.end()) {
      throw Error(fmt::format("country '{}' has fewer than {} users", *cfg.country,
                              cfg.min_country_users_recsys));
    }
    countries = {*cfg.country};
  }
  if (countries.empty()) {
    warn(fmt::format("no country has {} users; only the baseline runs",
                     cfg.min_country_users_recsys));
  }

  const auto root = derive_seed(cfg.seed, "recsys");
  auto specs = recsys::standard_specs(countries, cfg.folds, root);
  std::erase_if(specs, [&](const recsys::ExperimentSpec& s) {
    if (!s.measure) return false;
    if (cfg.basis && s.measure->basis != parse_basis(*cfg.basis)) return true;
    if (cfg.scope && to_string(s.measure->reference) != lower(*cfg.scope)) return true;
    if (cfg.method && to_string(s.measure->method) != lower(*cfg.method)) return true;
    return false;
  });

  const auto options = experiment_options(cfg);
  std::vector<recsys::EvalReport> reports;
  std::string lines;
  for (const auto& spec : specs) {
    reports.push_back(recsys::run_experiment(m, table, spec, options));
    lines += reports.back().to_json() + "\n";
  }
  out.write("recsys_reports.jsonl", lines);
  out.write("recsys_by_approach.csv",
            recsys::summary_csv(recsys::summarize_by_approach(reports), false));
  out.write("recsys_by_user_set.csv",
            recsys::summary_csv(recsys::summarize_by_user_set(reports), true));

  if (cfg.validate) {
    recsys::ValidationOptions v{cfg.subsamples, cfg.subsample_users,
                                derive_seed(cfg.seed, "validation")};
    out.write("validation.json",
              recsys::validation_suite(m, table, reports, options, v).to_json());
  }
}

void stage_report(Pipeline& p, OutputDir& out) {
  if (!out.exists("measure_summary.csv") || !out.exists("country_summary.csv")) {
    stage_stats(p, out);
  }
  if (!out.exists("recsys_by_approach.csv") || !out.exists("recsys_by_user_set.csv")) {
    stage_recsys(p, out);
  }
  std::string text;
  const std::pair<const char*, const char*> sections[] = {
      {"Mainstreaminess over all users", "measure_summary.csv"},
      {"Mainstreaminess per country", "country_summary.csv"},
      {"Rating prediction per approach", "recsys_by_approach.csv"},
      {"Rating prediction per approach and user set", "recsys_by_user_set.csv"},
  };
  for (const auto& [title, file] : sections) {
    text += fmt::format("## {}\n\n{}\n", title, out.read(file));
  }
  out.write("report.txt", text);
}

void update_manifest(OutputDir& out, const std::string& stage, const RunConfig& cfg,
                     const std::vector<std::string>& outputs) {
  json manifest;
  if (out.exists("manifest.json")) {
    try {
      manifest = json::parse(out.read("manifest.json"));
    } catch (const json::exception&) {
      manifest = json::object();
    }
  }
  manifest["tool"] = "mainstreamlab";
  manifest["version"] = kToolVersion;
  json inputs = json::object();
  if (!cfg.events.empty() && fs::exists(cfg.events)) {
    inputs["events"] = {{"path", cfg.events}, {"sha256", sha256_file(cfg.events)}};
  }
  if (!cfg.users.empty() && fs::exists(cfg.users)) {
    inputs["users"] = {{"path", cfg.users}, {"sha256", sha256_file(cfg.users)}};
  }
  auto sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  manifest["stages"][stage] = {{"config", config_json(cfg)}, {"inputs", inputs}, {"outputs", sorted}};
  out.write("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  RunConfig cfg;
  CLI::App app{"Music mainstreaminess measures, country outliers, clustering and "
               "mainstreaminess-filtered rating prediction",
               "mainstreamlab"};
  app.set_config("--config", "", "Flat key=value file mirroring the long flags");
  app.fallthrough();
  app.require_subcommand(1);

  app.add_option("--events", cfg.events, "Listening events TSV (3 or 5 columns)");
  app.add_option("--users", cfg.users, "Users TSV (user_id, country, ...)");
  app.add_option("--out", cfg.out, "Output directory");
  app.add_option("--seed", cfg.seed, "Root seed")->envname("MAINSTREAMLAB_SEED");
  app.add_option("--min-country-users", cfg.min_country_users, "Minimum users per country")
      ->check(CLI::PositiveNumber);
  app.add_option("--min-country-users-recsys", cfg.min_country_users_recsys,
                 "Minimum users per country for rating prediction");
  app.add_option("--epsilon", cfg.epsilon, "Additive smoothing before KL divergence")
      ->check(CLI::PositiveNumber);
  app.add_flag("--leave-one-out", cfg.leave_one_out,
               "Remove each user's own events from the reference profiles");
  app.add_option("--basis", cfg.basis, "apc or alc")
      ->check(CLI::IsMember({"apc", "alc", "APC", "ALC"}));
  app.add_option("--scope", cfg.scope, "global or country (recsys-eval filter)")
      ->check(CLI::IsMember({"global", "country"}));
  app.add_option("--method", cfg.method, "distribution or rank (recsys-eval filter)")
      ->check(CLI::IsMember({"distribution", "rank"}));
  app.add_option("--country", cfg.country, "Restrict to one ISO 3166-1 alpha-2 country");
  app.add_option("--top-artists", cfg.top_artists, "Length of the top-artist lists");
  app.add_option("--window", cfg.window, "Sliding window length");
  app.add_option("--pos-thresh", cfg.pos_thresh, "Positive outlier threshold in percent");
  app.add_option("--neg-thresh", cfg.neg_thresh, "Negative outlier threshold in percent");
  app.add_option("--horizon", cfg.horizon, "Number of globally top-ranked artists to scan");
  app.add_option("--top-outliers", cfg.top_outliers, "Outliers per polarity in the top lists");
  app.add_flag("--exclude-self", cfg.exclude_self, "Leave the artist out of its window mean");
  app.add_option("--damping", cfg.damping, "Affinity propagation damping");
  app.add_option("--max-iter", cfg.max_iter, "Affinity propagation iteration cap");
  app.add_option("--convergence-iter", cfg.convergence_iter,
                 "Iterations with a stable exemplar set before stopping");
  app.add_option("--preference", cfg.preference, "Affinity propagation preference");
  app.add_option("--top-k-features", cfg.top_k_features,
                 "Global top artists used as clustering features (0 = all)");
  app.add_option("--k", cfg.k, "Latent factors")->check(CLI::PositiveNumber);
  app.add_option("--lr", cfg.lr, "SGD learning rate");
  app.add_option("--reg", cfg.reg, "L2 regularization");
  app.add_option("--epochs", cfg.epochs, "SGD epochs");
  app.add_option("--folds", cfg.folds, "Cross-validation runs")->check(CLI::Range(2, 1000));
  app.add_option("--train-frac", cfg.train_frac, "Training share of each split");
  app.add_option("--rating-scale", cfg.rating_scale, "normalized or raw")
      ->check(CLI::IsMember({"normalized", "raw"}));
  app.add_option("--cold", cfg.cold, "Unseen users/items: zero or drop")
      ->check(CLI::IsMember({"zero", "drop"}));
  app.add_flag("--validate", cfg.validate, "Also run ICC and subsample validation");
  app.add_option("--subsamples", cfg.subsamples, "Validation subsamples per country");
  app.add_option("--subsample-users", cfg.subsample_users, "Users per validation subsample");

  using StageFn = void (*)(Pipeline&, OutputDir&);
  const std::pair<const char*, StageFn> stages[] = {
      {"ingest", stage_ingest},     {"popularity", stage_popularity},
      {"measures", stage_measures}, {"stats", stage_stats},
      {"outliers", stage_outliers}, {"cluster", stage_cluster},
      {"recsys-eval", stage_recsys}, {"report", stage_report},
  };
  const char* descriptions[] = {
      "Parse and filter the dataset; write a summary",
      "Top artists and popularity plot data",
      "Six mainstreaminess scores per user",
      "Descriptive statistics and tests over the scores",
      "Sliding-window and global-difference outliers per country",
      "Affinity propagation over country popularity vectors",
      "Mainstreaminess-filtered rating prediction experiments",
      "Collect summaries into report.txt",
  };
  std::vector<CLI::App*> subcommands;
  for (std::size_t i = 0; i < std::size(stages); ++i) {
    subcommands.push_back(app.add_subcommand(stages[i].first, descriptions[i]));
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::size_t chosen = 0;
  for (std::size_t i = 0; i < subcommands.size(); ++i) {
    if (subcommands[i]->parsed()) chosen = i;
  }

  std::optional<OutputDir> out;
  try {
    out.emplace(cfg.out);
    Pipeline pipeline(cfg, *out);
    stages[chosen].second(pipeline, *out);
    const auto outputs = out->written();
    update_manifest(*out, stages[chosen].first, cfg, outputs);
  } catch (const std::exception& e) {
    if (out) out->remove_written();
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mainstreamlab::cli
