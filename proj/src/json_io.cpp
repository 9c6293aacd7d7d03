#include "stratsim/json_io.hpp"

namespace stratsim {

namespace {

OrderedJson vector_to_json(const Vector& v) {
  OrderedJson arr = OrderedJson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

OrderedJson model_to_json(const Model& model) {
  OrderedJson j;
  j["family"] = model.family();
  if (const auto* lin = model.get_if<LinearModel>()) {
    j["feature_map"] = lin->feature_map == FeatureMap::AppendOne ? "append_one" : "identity";
    j["weights"] = vector_to_json(lin->weights);
  } else if (const auto* thr = model.get_if<ThresholdModel>()) {
    j["offset"] = thr->offset;
    j["utility_cap"] = thr->utility_cap;
  } else {
    const auto* k = model.get_if<KernelModel>();
    j["kernel"] = k->kernel.kind == KernelSpec::Kind::Rbf ? "rbf" : "linear";
    if (k->kernel.kind == KernelSpec::Kind::Rbf) j["gamma"] = k->kernel.gamma;
    j["bias"] = k->bias;
    j["support_count"] = k->support_count();
    OrderedJson sv = OrderedJson::array();
    for (int i = 0; i < k->support_count(); ++i) {
      OrderedJson one;
      one["x"] = vector_to_json(k->support_x.row(i));
      one["y"] = k->support_y(i);
      one["alpha"] = k->alphas(i);
      sv.push_back(std::move(one));
    }
    j["support"] = std::move(sv);
  }
  j["norm"] = model.norm();
  return j;
}

OrderedJson verdict_to_json(const Verdict& verdict) {
  OrderedJson j;
  switch (verdict.kind) {
    case Verdict::Kind::ConvergedZeroLoss:
      j["kind"] = "converged_zero_loss";
      j["at_step"] = verdict.at_step;
      break;
    case Verdict::Kind::Oscillating:
      j["kind"] = "oscillating";
      j["period"] = verdict.period;
      j["first_seen"] = verdict.first_seen;
      break;
    case Verdict::Kind::Exhausted:
      j["kind"] = "exhausted";
      j["max_steps"] = verdict.max_steps;
      break;
  }
  return j;
}

OrderedJson step_report_to_json(const StepReport& report, const Dataset& data) {
  OrderedJson j;
  j["step"] = report.state.step_index;
  j["zero_loss"] = report.is_zero_loss;
  OrderedJson services = OrderedJson::array();
  for (int s = 0; s < report.state.m(); ++s) {
    double pos = 0.0, neg = 0.0;
    for (int i = 0; i < report.state.n(); ++i)
      (data.y(i) == 1 ? pos : neg) += report.state.usage(i, s);
    OrderedJson one;
    one["loss"] = report.per_service_loss(s);
    one["pos_usage"] = pos;
    one["neg_usage"] = neg;
    one["model"] = model_to_json(report.state.models[static_cast<std::size_t>(s)]);
    services.push_back(std::move(one));
  }
  j["services"] = std::move(services);
  j["newly_revealed"] = report.newly_revealed.size();
  return j;
}

}  // namespace stratsim
