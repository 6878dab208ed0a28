#include "surfcdm/evaluation.hpp"

#include <memory>

#include "surfcdm/rng.hpp"

namespace surfcdm {

namespace {

template <typename ModelFor>
EvaluationReport run(std::span<const EvalItem> items, const SamplerConfig& cfg, std::uint64_t seed,
                     ModelFor&& model_for) {
    if (items.empty()) throw Error(ErrorKind::InvalidConfig, "evaluation split is empty");
    std::vector<std::string> ids;
    std::vector<MetricsRecord> records;
    for (std::size_t k = 0; k < items.size(); ++k) {
        const EvalItem& item = items[k];
        const auto result = segment(item.image, model_for(item), cfg, mix_seed(seed, k), item.centroid);
        ids.push_back(item.id);
        records.push_back(compute_metrics(result.mask, item.mask));
    }
    return summarize(std::move(ids), std::move(records));
}

}  // namespace

EvaluationReport evaluate(std::span<const EvalItem> items, const ScoreModel& model, const SamplerConfig& cfg,
                          std::uint64_t seed) {
    return run(items, cfg, seed, [&](const EvalItem&) -> const ScoreModel& { return model; });
}

EvaluationReport evaluate_oracle(std::span<const EvalItem> items, const SamplerConfig& cfg, std::uint64_t seed) {
    std::unique_ptr<OracleDenoiser> oracle;
    return run(items, cfg, seed, [&](const EvalItem& item) -> const ScoreModel& {
        oracle = std::make_unique<OracleDenoiser>(item.mask);
        return *oracle;
    });
}

}  // namespace surfcdm
