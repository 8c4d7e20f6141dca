#include "weakdiff/pipeline.hpp"

#include <fstream>
#include <stdexcept>

#include "weakdiff/rng.hpp"

namespace weakdiff {

EncoderSuite make_encoders(const RunConfig& cfg) {
  Vocabulary vocab = default_vocabulary();
  if (!cfg.vocab_file.empty()) {
    std::ifstream in(cfg.vocab_file);
    if (!in) throw std::runtime_error("cannot open vocabulary file '" + cfg.vocab_file + "'");
    vocab = Vocabulary::parse(in);
  }
  return EncoderSuite::make(std::move(vocab), cfg.embedding_dim, cfg.image_dim, cfg.embedding_seed);
}

std::shared_ptr<const RefinerClient> make_refiner(const RunConfig& cfg, const Vocabulary& vocab) {
  if (!cfg.refine_enabled) return nullptr;
  RefinementRuleSet rules = RefinementRuleSet::default_for(vocab);
  if (!cfg.rules_file.empty()) {
    std::ifstream in(cfg.rules_file);
    if (!in) throw std::runtime_error("cannot open rules file '" + cfg.rules_file + "'");
    rules = RefinementRuleSet::parse(in, vocab);
  }
  auto local = std::make_shared<RuleBasedRefiner>(std::move(rules));
  if (cfg.refine_endpoint.empty()) return local;
  return std::make_shared<ExternalRefiner>(cfg.external_refiner(), vocab, local);
}

TrainingRun train_pipeline(const RunConfig& cfg, const EncoderSuite& suite, std::span<const DataRecord> pretrain,
                           std::span<const DataRecord> weak, const RefinerClient* refiner) {
  cfg.validate();
  const NoiseSchedule schedule = cfg.schedule();
  std::vector<ImageVector> images;
  images.reserve(pretrain.size());
  for (const DataRecord& r : pretrain) images.push_back(r.image);
  LinearCodec codec = LinearCodec::fit(images, cfg.latent_dim);

  CrossAttentionMLP initial = CrossAttentionMLP::initialized(cfg.mlp_shape(), derive_seed(cfg.seed, kModelInitStream));
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  PhaseResult phase1 = run_phase1(tc, initial, codec, schedule, pretrain);
  std::optional<PhaseResult> phase2;
  if (tc.phase2_steps > 0) {
    phase2 = run_phase2(tc, phase1.model, codec, schedule, cfg.reverse(), suite, weak, refiner);
  }
  return TrainingRun{std::move(codec), std::move(initial), std::move(phase1), std::move(phase2)};
}

std::vector<AblationVariant> default_ablation_variants() {
  return {{"full", true, true},
          {"no-refinement", true, false},
          {"no-filter", false, true},
          {"without-both", false, false}};
}

const VariantReport& AblationReport::get(const std::string& name) const {
  for (const VariantReport& v : variants) {
    if (v.name == name) return v;
  }
  throw std::out_of_range("ablation report has no variant '" + name + "'");
}

StyleSamples sample_styles(const RunConfig& cfg, const EncoderSuite& suite, const CrossAttentionMLP& model,
                           const RefinerClient* refiner, std::size_t per_style) {
  const NoiseSchedule schedule = cfg.schedule();
  const std::uint64_t base = derive_seed(cfg.seed, kEvalSamplingStream);
  StyleSamples out;
  for (std::size_t k = 0; k < style_count(suite.vocab); ++k) {
    TokenList user{style_attributes(suite.vocab, k).front()};
    const TokenList prompt = refiner != nullptr ? refine_prompt(*refiner, user, suite.vocab) : user;
    const ConditioningVector cond = condition_on(suite, prompt);
    out.latents.push_back(sample_many(model, cond, schedule, cfg.reverse(), derive_seed(base, k), per_style));
    out.user_prompts.push_back(std::move(user));
  }
  return out;
}

AblationReport run_ablation(const RunConfig& cfg, const AblationOptions& options) {
  cfg.validate();
  const EncoderSuite suite = make_encoders(cfg);
  const std::size_t styles = style_count(suite.vocab);
  const auto pretrain = generate_dataset(suite, cfg.generator(cfg.pretrain_n, 0.0, derive_seed(cfg.seed, kPretrainDataStream)));
  const auto weak = generate_dataset(suite, cfg.generator(cfg.data_n, cfg.corruption_rate, derive_seed(cfg.seed, kWeakDataStream)));
  const auto heldout = generate_dataset(suite, cfg.generator(options.heldout_n, 0.0, derive_seed(cfg.seed, kHeldoutDataStream)));

  RunConfig p1_cfg = cfg;
  p1_cfg.train.phase2_steps = 0;
  const TrainingRun base = train_pipeline(p1_cfg, suite, pretrain, weak, nullptr);
  const LinearCodec& codec = base.codec;

  std::vector<std::vector<LatentVector>> real(styles);
  for (const DataRecord& r : heldout) {
    const auto style = style_of(suite.vocab, r.true_attributes);
    if (style) real[*style].push_back(codec.encode(r.image));
  }
  std::vector<GaussianFit> real_fits;
  for (std::size_t k = 0; k < styles; ++k) real_fits.push_back(fit_gaussian(real[k]));

  RunConfig rule_cfg = cfg;
  rule_cfg.refine_enabled = true;
  const auto refiner = make_refiner(rule_cfg, suite.vocab);
  const NoiseSchedule schedule = cfg.schedule();

  AblationReport report;
  for (const AblationVariant& variant : options.variants) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.apply_filter = variant.filter;
    const RefinerClient* ref = variant.refine ? refiner.get() : nullptr;
    const PhaseResult p2 = run_phase2(tc, base.phase1.model, codec, schedule, cfg.reverse(), suite, weak, ref);

    const StyleSamples samples = sample_styles(cfg, suite, p2.model, ref, options.samples_per_style);
    VariantReport vr;
    vr.name = variant.name;
    vr.kept_records = p2.kept_records;
    vr.selected_step = p2.selected_step;
    AlignmentInput align{variant.name, {}, {}};
    std::vector<LatentVector> pooled;
    for (std::size_t k = 0; k < styles; ++k) {
      vr.per_style_fd.push_back(frechet_distance(fit_gaussian(samples.latents[k]), real_fits[k]));
      vr.fd_latent += vr.per_style_fd.back() / static_cast<double>(styles);
      const TokenList target = refine_prompt(*refiner, samples.user_prompts[k], suite.vocab);
      for (const LatentVector& z : samples.latents[k]) {
        align.prompts.push_back(target);
        align.images.push_back(codec.decode(z));
        pooled.push_back(z);
      }
    }
    vr.diversity = diversity_proxy(pooled, styles, cfg.seed).value;
    BootstrapOptions boot{cfg.bootstrap_resamples, cfg.bootstrap_confidence, cfg.seed};
    vr.alignment = alignment_table(suite, std::span<const AlignmentInput>(&align, 1), boot).front();
    report.variants.push_back(std::move(vr));
  }
  return report;
}

}  // namespace weakdiff
