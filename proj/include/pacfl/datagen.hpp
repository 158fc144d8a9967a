#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pacfl/model.hpp"
#include "pacfl/rng.hpp"

namespace pacfl {

// How the generator turns a drawn class into the example's target.
enum class TargetKind {
  class_index,   // y = class
  signed_class,  // y = +1 / -1 (binary only), a regression target
  teacher,       // y = <w*, x> + noise, w* a fixed unit vector
};

std::string to_string(TargetKind kind);
TargetKind target_kind_from_string(const std::string& name);

struct DatasetSpec {
  int num_clients = 1;
  // Per-client sizes; a single entry is broadcast to every client.
  std::vector<int> client_sizes = {8};
  int input_dim = 2;
  int num_classes = 2;
  double class_separation = 1.0;
  double diameter_cap = 2.0;
  std::uint64_t seed = 0;
  TargetKind targets = TargetKind::class_index;
  double teacher_noise = 0.0;

  int size_of(int client) const;
  void validate() const;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }
  Batch batch() const { return examples; }
};

// The data distribution P: a mixture of unit-variance Gaussians around
// per-class means, rescaled so features land in a ball of radius D/2 (points
// falling outside are projected radially onto the sphere).
class DataDistribution {
 public:
  explicit DataDistribution(const DatasetSpec& spec);

  LabeledExample sample(Rng& rng) const;
  const DatasetSpec& spec() const { return spec_; }
  double radius() const { return 0.5 * spec_.diameter_cap; }

 private:
  DatasetSpec spec_;
  std::vector<std::vector<double>> means_;
  std::vector<double> teacher_;
  double scale_ = 1.0;
};

std::vector<ClientDataset> generate(const DatasetSpec& spec);

// Max pairwise Euclidean feature distance; exact O(m^2) scan.
double diameter(Batch examples);

// (2d)^(2D/lambda^2 + 1); may be +inf for large exponents.
double covering_number(int d, double D, double lambda);
// Natural log of covering_number, finite for all valid inputs.
double log_covering_number(int d, double D, double lambda);

// Source of evaluation examples. Returns nullopt once exhausted.
class Sampler {
 public:
  virtual ~Sampler() = default;
  virtual std::optional<LabeledExample> next() = 0;
};

// Draws fresh examples from the distribution; never exhausts.
class DistributionSampler final : public Sampler {
 public:
  DistributionSampler(DataDistribution dist, std::uint64_t seed)
      : dist_(std::move(dist)), rng_(seed) {}
  std::optional<LabeledExample> next() override { return dist_.sample(rng_); }

 private:
  DataDistribution dist_;
  Rng rng_;
};

// Replays a fixed list once, in order.
class ReplaySampler final : public Sampler {
 public:
  explicit ReplaySampler(std::vector<LabeledExample> examples)
      : examples_(std::move(examples)) {}
  std::optional<LabeledExample> next() override {
    if (pos_ >= examples_.size()) return std::nullopt;
    return examples_[pos_++];
  }

 private:
  std::vector<LabeledExample> examples_;
  std::size_t pos_ = 0;
};

struct ConstantsOptions {
  int num_pairs = 200;
  // Lower tail for c_a; c_b uses 1 - quantile. 0 selects min/max.
  double quantile = 0.05;
  // Radius of the parameter perturbations used for C and M.
  double delta_budget = 0.5;
  int num_perturbations = 64;
  std::uint64_t seed = 0;
};

struct RegretFit {
  double c0 = 0.0;         // min over T of S_T / sqrt(T)
  double c2 = 0.0;         // max over T of S_T / sqrt(T)
  double least_squares = 0.0;  // argmin_c sum_T (S_T - c sqrt(T))^2
  int length = 0;
};

// Envelope constants of the cumulative mismatch series S_T = sum_{t<=T} s_t
// against sqrt(T).
RegretFit fit_regret_constants(std::span<const double> mismatch);

struct ConstantsEstimate {
  double c_a = 0.0;
  double c_b = 0.0;
  double C = 0.0;
  double C_theta = 0.0;  // loss Lipschitz in parameters
  double C_data = 0.0;   // loss Lipschitz in features
  double M = 0.0;
  double D = 0.0;
  double c0 = 0.0;
  double c2 = 0.0;
  double c_ls = 0.0;
  // Method metadata.
  int pairs_requested = 0;
  int pairs_used = 0;
  int pairs_skipped = 0;
  double quantile = 0.0;
  double delta_budget = 0.0;
  int perturbations = 0;
  int pilot_length = 0;
  std::vector<double> ratios;  // the usable ||dX|| / ||dgrad|| values, in draw order

  double skip_rate() const {
    return pairs_requested == 0
               ? 0.0
               : static_cast<double>(pairs_skipped) / pairs_requested;
  }
};

// Sample-based estimates of the Lipschitz bracket, loss constants, data
// diameter, and (when a pilot mismatch series is given) the regret envelope.
// Throws EstimationError when every sampled pair is degenerate.
ConstantsEstimate estimate_constants(const ModelSpec& spec,
                                     const ParamVector& theta_probe,
                                     std::span<const ClientDataset> datasets,
                                     const ConstantsOptions& options,
                                     std::span<const double> pilot_mismatch = {});

// Linear-interpolation quantile of an unsorted sample; q in [0, 1].
double sample_quantile(std::vector<double> values, double q);

// CSV with header "client_id,x0,...,x{p-1},label".
void write_datasets_csv(std::ostream& out, std::span<const ClientDataset> datasets);
std::vector<ClientDataset> read_datasets_csv(std::istream& in);

}  // namespace pacfl
