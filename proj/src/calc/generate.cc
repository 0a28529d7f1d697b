#include "dpost/calc/generate.h"

namespace dpost::calc {

size_t DecodedRationale::malformed_count() const {
  size_t n = 0;
  for (const auto& e : events) n += e.kind == CalcEvent::Kind::kMalformed;
  return n;
}

std::vector<DecodedRationale> generate_rationales(const engine::ModelCheckpoint& model,
                                                  std::span<const engine::GenerationRequest> requests,
                                                  const engine::SamplingConfig& config,
                                                  const GenerateOptions& options, engine::DecodeStats* stats) {
  engine::Decoder decoder(model);
  Calculator calculator(model.tokenizer(), options.echo_result);
  engine::LaneFilterFactory factory = calculator_lanes(calculator);
  auto raw = decoder.generate(requests, config, options.max_batch, config.calculator_enabled ? &factory : nullptr,
                              stats);
  std::vector<DecodedRationale> out;
  out.reserve(raw.size());
  for (auto& g : raw) {
    DecodedRationale d;
    d.text = model.tokenizer().decode(g.tokens);
    d.rationale = corpus::Rationale::from_text(d.text);
    d.tokens = std::move(g.tokens);
    d.stopped_at_eos = g.stopped_at_eos;
    d.steps = g.steps;
    if (auto* lane = dynamic_cast<CalculatorLane*>(g.filter.get())) d.events = lane->state().events;
    out.push_back(std::move(d));
  }
  return out;
}

DecodedRationale generate(const engine::ModelCheckpoint& model, const std::string& question,
                          const engine::SamplingConfig& config, uint64_t stream, const GenerateOptions& options) {
  engine::GenerationRequest req{model.tokenizer().encode_prompt(question), stream};
  GenerateOptions single = options;
  single.max_batch = 1;
  return std::move(generate_rationales(model, std::span(&req, 1), config, single).front());
}

}  // namespace dpost::calc
