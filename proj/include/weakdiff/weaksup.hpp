#pragma once

// Synthetic weakly-labeled data and the score-and-threshold filter.
//
// The vocabulary is read as four equal contiguous categories (garment,
// fabric, motif, region). Style k owns token k of every category, so a
// vocabulary of size V defines V / 4 styles with pairwise-disjoint attribute
// sets. A record renders its style's attribute indicator through the
// attribute map and adds isotropic Gaussian noise. A corrupted record keeps
// the image but carries the full caption of a different style.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "weakdiff/embedding.hpp"
#include "weakdiff/vector.hpp"

namespace weakdiff {

inline constexpr std::size_t kAttributeCategories = 4;

// The shipped 32-token vocabulary (8 styles).
Vocabulary default_vocabulary();

std::size_t style_count(const Vocabulary& vocab);
// Tokens of style k, one per category, in category order.
TokenList style_attributes(const Vocabulary& vocab, std::size_t style);
// Style whose attribute set equals `tokens` as a set, if any.
std::optional<std::size_t> style_of(const Vocabulary& vocab, std::span<const std::string> tokens);
// 0/1 vector over the vocabulary marking the distinct in-vocabulary tokens.
std::vector<double> attribute_indicator(const Vocabulary& vocab, std::span<const std::string> tokens);

struct DataRecord {
  std::string id;
  ImageVector image;
  TokenList caption;
  // Generator ground truth; absent for data from elsewhere.
  TokenList true_attributes;
  std::optional<bool> corrupted;

  friend bool operator==(const DataRecord&, const DataRecord&) = default;
};

struct GeneratorConfig {
  std::size_t n = 1000;
  double corruption_rate = 0.3;
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Ids are "rec-000000", "rec-000001", ... Needs V >= 8 and m >= V.
std::vector<DataRecord> generate_dataset(const EncoderSuite& suite, const GeneratorConfig& cfg);

double score_record(const EncoderSuite& suite, const DataRecord& record);
std::vector<double> score_records(const EncoderSuite& suite, std::span<const DataRecord> records);

enum class TauPolicyKind { fixed, percentile, valley };

TauPolicyKind parse_tau_policy(std::string_view name);
std::string_view tau_policy_name(TauPolicyKind kind);

struct TauPolicy {
  TauPolicyKind kind = TauPolicyKind::fixed;
  // fixed: tau itself. percentile: q in [0, 100].
  double value = 0.8;
  // Histogram resolution for the valley policy.
  std::size_t bins = 40;
};

// fixed: returns value. percentile: linear interpolation between order
// statistics at position (q / 100)(n - 1). valley: histogram over [-1, 1]
// (out-of-range scores clamp into the end bins, the range is padded with
// empty bins); the two local maxima with the largest topographic prominence
// are the modes; tau is the midpoint of the lowest run of bins between them,
// preferring the longest such run. Throws std::invalid_argument for an empty
// score list (percentile, valley) and when fewer than two modes exist.
double choose_tau(std::span<const double> scores, const TauPolicy& policy);

// Counts against generator truth. "clean" means corrupted == false.
struct ConfusionMatrix {
  std::size_t clean_kept = 0;
  std::size_t clean_dropped = 0;
  std::size_t corrupted_kept = 0;
  std::size_t corrupted_dropped = 0;

  // clean_kept / clean total (1 when there are no clean records).
  double clean_recall() const;
  // corrupted_kept / corrupted total (0 when there are no corrupted records).
  double false_keep_rate() const;
};

struct FilterReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t dropped = 0;
  double tau = 0.0;
  // Equal-width bins over [-1, 1].
  std::vector<std::size_t> score_histogram;
  std::vector<double> scores;
  // Present when every record carries a corrupted flag.
  std::optional<ConfusionMatrix> confusion;
};

struct FilterResult {
  std::vector<DataRecord> kept;
  FilterReport report;
};

inline constexpr std::size_t kReportHistogramBins = 20;

// Keeps records with score > tau, in input order. tau must lie in [-1, 1].
FilterResult filter_by_scores(std::span<const DataRecord> records, std::span<const double> scores, double tau);
FilterResult filter_dataset(const EncoderSuite& suite, std::span<const DataRecord> records, double tau);
// Scores once, chooses tau by policy, then filters.
FilterResult filter_dataset(const EncoderSuite& suite, std::span<const DataRecord> records, const TauPolicy& policy);

}  // namespace weakdiff
