#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mainstreamlab::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 42;

// Every knob of a run. Defaults are the values the pipeline is documented
// with; the resolved config is written into manifest.json next to outputs.
struct RunConfig {
  std::string events;
  std::string users;
  std::string out = ".";
  std::uint64_t seed = kDefaultSeed;
  std::size_t min_country_users = 100;
  std::size_t min_country_users_recsys = 1000;
  double epsilon = 1e-8;
  bool leave_one_out = false;

  std::optional<std::string> basis;   // apc | alc
  std::optional<std::string> scope;   // global | country (recsys-eval filter)
  std::optional<std::string> method;  // distribution | rank (recsys-eval filter)
  std::optional<std::string> country;

  std::size_t top_artists = 30;
  std::size_t window = 5;
  double pos_thresh = 100.0;
  double neg_thresh = -50.0;
  std::size_t horizon = 10'000;
  std::size_t top_outliers = 20;
  bool exclude_self = false;

  double damping = 0.5;
  std::size_t max_iter = 200;
  std::size_t convergence_iter = 15;
  std::optional<double> preference;
  std::size_t top_k_features = 10'000;

  std::size_t k = 32;
  double lr = 0.01;
  double reg = 0.05;
  std::size_t epochs = 20;
  std::size_t folds = 3;
  double train_frac = 0.8;
  std::string rating_scale = "normalized";  // normalized | raw
  std::string cold = "zero";                // zero | drop
  bool validate = false;
  std::size_t subsamples = 5;
  std::size_t subsample_users = 500;
};

// Parses argv and runs one subcommand:
//   ingest | popularity | measures | stats | outliers | cluster | recsys-eval | report
// Returns the process exit status. Errors are reported on stderr and any
// files written by the failed invocation are removed.
int run(int argc, const char* const* argv);

// Same, with an argument vector that excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace mainstreamlab::cli
