#include "plan.hpp"

#include <json.hpp>

#include "error.hpp"

namespace smoekit {

using nlohmann::json;

const char* reduce_method_name(ReduceMethod m) {
  switch (m) {
    case ReduceMethod::uncurl: return "uncurl";
    case ReduceMethod::freq_prune: return "freq-prune";
    case ReduceMethod::freq_merge: return "freq-merge";
    case ReduceMethod::global_merge: return "global-merge";
  }
  return "uncurl";
}

ReduceMethod reduce_method_from_name(const std::string& name) {
  if (name == "uncurl") return ReduceMethod::uncurl;
  if (name == "freq-prune") return ReduceMethod::freq_prune;
  if (name == "freq-merge") return ReduceMethod::freq_merge;
  if (name == "global-merge") return ReduceMethod::global_merge;
  throw_validation("unknown reduce method \"" + name +
                   "\" (expected uncurl|freq-prune|freq-merge|global-merge)");
}

std::string plan_to_json(const MergePlan& plan) {
  json doc;
  doc["method"] = reduce_method_name(plan.method);
  doc["target"] = plan.target;
  json layers = json::array();
  for (const auto& lp : plan.layers) {
    json l;
    l["layer"] = lp.layer_id;
    l["z"] = lp.z;
    l["n_clusters"] = lp.n_clusters;
    l["skipped"] = lp.skipped;
    l["labels"] = lp.labels;
    l["references"] = lp.references;
    l["permutations"] = lp.permutations;
    l["weights"] = lp.weights;
    l["disposition"] = lp.disposition == RouterDisposition::reinitialize
                           ? "reinitialize"
                           : "keep_columns";
    layers.push_back(std::move(l));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(2);
}

MergePlan plan_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCategory::format,
                std::string("plan is not valid JSON: ") + e.what());
  }
  MergePlan plan;
  try {
    plan.method = reduce_method_from_name(doc.at("method").get<std::string>());
    plan.target = doc.at("target").get<uint32_t>();
    for (const auto& l : doc.at("layers")) {
      LayerPlan lp;
      lp.layer_id = l.at("layer").get<uint32_t>();
      lp.z = l.at("z").get<uint32_t>();
      lp.n_clusters = l.at("n_clusters").get<uint32_t>();
      lp.skipped = l.at("skipped").get<bool>();
      lp.labels = l.at("labels").get<std::vector<int32_t>>();
      lp.references = l.at("references").get<std::vector<uint32_t>>();
      lp.permutations = l.at("permutations").get<std::vector<std::vector<size_t>>>();
      lp.weights = l.at("weights").get<Vec>();
      const std::string disp = l.at("disposition").get<std::string>();
      if (disp == "reinitialize") {
        lp.disposition = RouterDisposition::reinitialize;
      } else if (disp == "keep_columns") {
        lp.disposition = RouterDisposition::keep_columns;
      } else {
        throw_validation("plan: unknown disposition \"" + disp + "\"");
      }
      plan.layers.push_back(std::move(lp));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::format,
                std::string("plan JSON missing or mistyped field: ") + e.what());
  }
  return plan;
}

}  // namespace smoekit
