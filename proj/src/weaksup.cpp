#include "weakdiff/weaksup.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "weakdiff/rng.hpp"

namespace weakdiff {
namespace {

std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins) {
  std::vector<std::size_t> h(bins, 0);
  const double width = 2.0 / static_cast<double>(bins);
  for (double s : scores) {
    const double pos = std::floor((s + 1.0) / width);
    const auto idx = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
    ++h[idx];
  }
  return h;
}

struct Mode {
  std::size_t first;
  std::size_t last;
  double height;
  double prominence;
};

double valley_tau(std::span<const double> scores, std::size_t bins) {
  if (bins < 3) throw std::invalid_argument("choose_tau: valley policy needs at least 3 bins");
  const std::vector<std::size_t> h = histogram(scores, bins);
  std::vector<double> p(bins + 2, 0.0);
  for (std::size_t i = 0; i < bins; ++i) p[i + 1] = static_cast<double>(h[i]);

  std::vector<Mode> modes;
  for (std::size_t i = 1; i <= bins;) {
    std::size_t j = i;
    while (j + 1 <= bins && p[j + 1] == p[i]) ++j;
    const double v = p[i];
    if (v > 0.0 && p[i - 1] < v && p[j + 1] < v) {
      double left_min = v;
      for (std::size_t k = i; k-- > 0 && p[k] <= v;) left_min = std::min(left_min, p[k]);
      double right_min = v;
      for (std::size_t k = j + 1; k < p.size() && p[k] <= v; ++k) right_min = std::min(right_min, p[k]);
      modes.push_back({i, j, v, v - std::max(left_min, right_min)});
    }
    i = j + 1;
  }
  if (modes.size() < 2) throw std::invalid_argument("choose_tau: valley policy needs a bimodal score histogram");

  std::stable_sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.prominence != b.prominence) return a.prominence > b.prominence;
    return a.height > b.height;
  });
  const Mode& lo = modes[0].first < modes[1].first ? modes[0] : modes[1];
  const Mode& hi = modes[0].first < modes[1].first ? modes[1] : modes[0];

  double floor_value = p[lo.last + 1];
  for (std::size_t k = lo.last + 1; k < hi.first; ++k) floor_value = std::min(floor_value, p[k]);
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t k = lo.last + 1; k < hi.first;) {
    if (p[k] != floor_value) {
      ++k;
      continue;
    }
    std::size_t end = k;
    while (end + 1 < hi.first && p[end + 1] == floor_value) ++end;
    if (end - k + 1 > best_len) {
      best_start = k;
      best_len = end - k + 1;
    }
    k = end + 1;
  }
  const double width = 2.0 / static_cast<double>(bins);
  const double lower = -1.0 + static_cast<double>(best_start - 1) * width;
  const double upper = -1.0 + static_cast<double>(best_start - 1 + best_len) * width;
  return 0.5 * (lower + upper);
}

}  // namespace

Vocabulary default_vocabulary() {
  return Vocabulary::from_tokens({
      // garment
      "sari", "kimono", "hanbok", "dashiki", "kaftan", "qipao", "poncho", "kilt",
      // fabric
      "silk", "crepe", "ramie", "cotton", "linen", "brocade", "alpaca", "wool",
      // motif
      "paisley", "sakura", "cloud", "adinkra", "arabesque", "peony", "chakana", "tartan",
      // region
      "south-asian", "japanese", "korean", "west-african", "north-african", "chinese", "andean", "scottish",
  });
}

std::size_t style_count(const Vocabulary& vocab) { return vocab.size() / kAttributeCategories; }

TokenList style_attributes(const Vocabulary& vocab, std::size_t style) {
  const std::size_t k = style_count(vocab);
  if (style >= k) throw std::out_of_range("style index out of range");
  TokenList out;
  for (std::size_t c = 0; c < kAttributeCategories; ++c) out.push_back(vocab.token(c * k + style));
  return out;
}

std::optional<std::size_t> style_of(const Vocabulary& vocab, std::span<const std::string> tokens) {
  const std::vector<std::size_t> ids = vocab.distinct_indices(tokens);
  const std::size_t k = style_count(vocab);
  if (ids.size() != kAttributeCategories || k == 0) return std::nullopt;
  const std::size_t style = ids.front() % k;
  for (std::size_t id : ids) {
    if (id % k != style || id >= k * kAttributeCategories) return std::nullopt;
  }
  std::vector<bool> seen(kAttributeCategories, false);
  for (std::size_t id : ids) seen[id / k] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) return std::nullopt;
  return style;
}

std::vector<double> attribute_indicator(const Vocabulary& vocab, std::span<const std::string> tokens) {
  std::vector<double> s(vocab.size(), 0.0);
  for (std::size_t id : vocab.distinct_indices(tokens)) s[id] = 1.0;
  return s;
}

void GeneratorConfig::validate() const {
  if (!(corruption_rate >= 0.0 && corruption_rate <= 1.0)) {
    throw std::invalid_argument("corruption rate must lie in [0, 1]");
  }
  if (!(noise_level >= 0.0) || !std::isfinite(noise_level)) {
    throw std::invalid_argument("noise level must be finite and >= 0");
  }
  if (n == 0) throw std::invalid_argument("dataset size must be >= 1");
}

std::vector<DataRecord> generate_dataset(const EncoderSuite& suite, const GeneratorConfig& cfg) {
  cfg.validate();
  if (suite.vocab.size() < 8) throw std::invalid_argument("generate_dataset: vocabulary needs at least 8 tokens");
  const std::size_t styles = style_count(suite.vocab);
  const std::size_t m = suite.attributes.image_dim();

  std::vector<ImageVector> prototypes;
  std::vector<TokenList> captions;
  for (std::size_t k = 0; k < styles; ++k) {
    captions.push_back(style_attributes(suite.vocab, k));
    prototypes.push_back(suite.attributes.render(attribute_indicator(suite.vocab, captions.back())));
  }

  Rng rng(cfg.seed);
  std::vector<DataRecord> out;
  out.reserve(cfg.n);
  std::vector<double> noise(m);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    const std::size_t style = rng.index(styles);
    const bool corrupt = rng.uniform() < cfg.corruption_rate;
    std::size_t shown = style;
    if (corrupt) {
      shown = rng.index(styles - 1);
      if (shown >= style) ++shown;
    }
    rng.fill_normal(noise);
    ImageVector image = prototypes[style];
    if (cfg.noise_level > 0.0) {
      for (std::size_t j = 0; j < m; ++j) image[j] += cfg.noise_level * noise[j];
    }
    char id[32];
    std::snprintf(id, sizeof id, "rec-%06zu", i);
    out.push_back(DataRecord{id, std::move(image), captions[shown], captions[style], corrupt});
  }
  return out;
}

double score_record(const EncoderSuite& suite, const DataRecord& record) {
  return alignment_score(suite, record.caption, record.image);
}

std::vector<double> score_records(const EncoderSuite& suite, std::span<const DataRecord> records) {
  std::vector<double> scores;
  scores.reserve(records.size());
  for (const DataRecord& r : records) scores.push_back(score_record(suite, r));
  return scores;
}

TauPolicyKind parse_tau_policy(std::string_view name) {
  if (name == "fixed") return TauPolicyKind::fixed;
  if (name == "percentile") return TauPolicyKind::percentile;
  if (name == "valley") return TauPolicyKind::valley;
  throw std::invalid_argument("unknown tau policy '" + std::string(name) + "' (expected fixed, percentile or valley)");
}

std::string_view tau_policy_name(TauPolicyKind kind) {
  switch (kind) {
    case TauPolicyKind::fixed: return "fixed";
    case TauPolicyKind::percentile: return "percentile";
    case TauPolicyKind::valley: return "valley";
  }
  return "unknown";
}

double choose_tau(std::span<const double> scores, const TauPolicy& policy) {
  switch (policy.kind) {
    case TauPolicyKind::fixed:
      return policy.value;
    case TauPolicyKind::percentile: {
      if (scores.empty()) throw std::invalid_argument("choose_tau: no scores");
      if (!(policy.value >= 0.0 && policy.value <= 100.0)) {
        throw std::invalid_argument("choose_tau: percentile must lie in [0, 100]");
      }
      std::vector<double> sorted(scores.begin(), scores.end());
      std::sort(sorted.begin(), sorted.end());
      const double pos = policy.value / 100.0 * static_cast<double>(sorted.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      const double frac = pos - static_cast<double>(lo);
      return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    }
    case TauPolicyKind::valley:
      if (scores.empty()) throw std::invalid_argument("choose_tau: no scores");
      return valley_tau(scores, policy.bins);
  }
  throw std::invalid_argument("choose_tau: unknown policy");
}

double ConfusionMatrix::clean_recall() const {
  const std::size_t clean = clean_kept + clean_dropped;
  return clean == 0 ? 1.0 : static_cast<double>(clean_kept) / static_cast<double>(clean);
}

double ConfusionMatrix::false_keep_rate() const {
  const std::size_t corrupted = corrupted_kept + corrupted_dropped;
  return corrupted == 0 ? 0.0 : static_cast<double>(corrupted_kept) / static_cast<double>(corrupted);
}

FilterResult filter_by_scores(std::span<const DataRecord> records, std::span<const double> scores, double tau) {
  require_same_size(records.size(), scores.size(), "filter scores");
  if (!(tau >= -1.0 && tau <= 1.0)) throw std::invalid_argument("filter: tau must lie in [-1, 1]");

  FilterResult result;
  FilterReport& report = result.report;
  report.total = records.size();
  report.tau = tau;
  report.scores.assign(scores.begin(), scores.end());
  report.score_histogram = histogram(scores, kReportHistogramBins);

  const bool has_truth =
      std::all_of(records.begin(), records.end(), [](const DataRecord& r) { return r.corrupted.has_value(); });
  ConfusionMatrix confusion;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const bool keep = scores[i] > tau;
    if (keep) result.kept.push_back(records[i]);
    if (has_truth) {
      const bool corrupt = *records[i].corrupted;
      (corrupt ? (keep ? confusion.corrupted_kept : confusion.corrupted_dropped)
               : (keep ? confusion.clean_kept : confusion.clean_dropped))++;
    }
  }
  report.kept = result.kept.size();
  report.dropped = report.total - report.kept;
  if (has_truth) report.confusion = confusion;
  return result;
}

FilterResult filter_dataset(const EncoderSuite& suite, std::span<const DataRecord> records, double tau) {
  const std::vector<double> scores = score_records(suite, records);
  return filter_by_scores(records, scores, tau);
}

FilterResult filter_dataset(const EncoderSuite& suite, std::span<const DataRecord> records, const TauPolicy& policy) {
  const std::vector<double> scores = score_records(suite, records);
  return filter_by_scores(records, scores, choose_tau(scores, policy));
}

}  // namespace weakdiff
