#include <json.hpp>

#include "traitpipe/learners.hpp"

namespace traitpipe::learn {

namespace {

using nlohmann::json;

json spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = family_slug(spec.family);
  j["scheme"] = psych::scheme_slug(spec.scheme);
  if (spec.seed.has_value()) j["seed"] = *spec.seed;
  j["tree"] = {{"max_depth", spec.tree.max_depth}, {"min_leaf", spec.tree.min_leaf}};
  j["linear"] = {{"lambda", spec.linear.lambda},
                 {"tolerance", spec.linear.tolerance},
                 {"max_iterations", spec.linear.max_iterations}};
  j["forest"] = {{"tree_grid", spec.forest.tree_grid},
                 {"depth_grid", spec.forest.depth_grid},
                 {"min_leaf", spec.forest.min_leaf},
                 {"cv_folds", spec.forest.cv_folds}};
  j["mlp"] = {{"hidden", spec.mlp.hidden},
              {"epochs", spec.mlp.epochs},
              {"batch_size", spec.mlp.batch_size},
              {"learning_rate", spec.mlp.learning_rate}};
  return j;
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec spec;
  spec.family = family_from_slug(j.at("family").get<std::string>());
  spec.scheme = psych::scheme_from_slug(j.at("scheme").get<std::string>());
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  spec.tree.max_depth = j.at("tree").at("max_depth").get<std::size_t>();
  spec.tree.min_leaf = j.at("tree").at("min_leaf").get<std::size_t>();
  spec.linear.lambda = j.at("linear").at("lambda").get<double>();
  spec.linear.tolerance = j.at("linear").at("tolerance").get<double>();
  spec.linear.max_iterations = j.at("linear").at("max_iterations").get<std::size_t>();
  spec.forest.tree_grid = j.at("forest").at("tree_grid").get<std::vector<std::size_t>>();
  spec.forest.depth_grid = j.at("forest").at("depth_grid").get<std::vector<std::size_t>>();
  spec.forest.min_leaf = j.at("forest").at("min_leaf").get<std::size_t>();
  spec.forest.cv_folds = j.at("forest").at("cv_folds").get<std::size_t>();
  spec.mlp.hidden = j.at("mlp").at("hidden").get<std::vector<std::size_t>>();
  spec.mlp.epochs = j.at("mlp").at("epochs").get<std::size_t>();
  spec.mlp.batch_size = j.at("mlp").at("batch_size").get<std::size_t>();
  spec.mlp.learning_rate = j.at("mlp").at("learning_rate").get<double>();
  return spec;
}

json tree_to_json(const TreeModel& tree) {
  json nodes = json::array();
  for (const auto& node : tree.nodes) {
    json n;
    n["leaf"] = node.leaf;
    if (node.leaf) {
      n["counts"] = node.class_counts;
    } else {
      n["feature"] = node.feature;
      n["threshold"] = node.threshold;
      n["left"] = node.left;
      n["right"] = node.right;
    }
    nodes.push_back(std::move(n));
  }
  return nodes;
}

TreeModel tree_from_json(const json& j) {
  TreeModel tree;
  for (const auto& n : j) {
    TreeNode node;
    node.leaf = n.at("leaf").get<bool>();
    if (node.leaf) {
      node.class_counts = n.at("counts").get<std::vector<double>>();
    } else {
      node.feature = n.at("feature").get<std::size_t>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<std::int32_t>();
      node.right = n.at("right").get<std::int32_t>();
    }
    tree.nodes.push_back(std::move(node));
  }
  return tree;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["schema_version"] = 1;
  j["spec"] = spec_to_json(model.spec);
  json classes = json::array();
  for (const auto c : model.classes) classes.push_back(psych::label_slug(c));
  j["classes"] = std::move(classes);
  j["feature_names"] = model.feature_names;

  if (model.preprocessing.has_value()) {
    const auto& prep = *model.preprocessing;
    json p;
    p["imputer"] = {{"input_names", prep.imputer.input_names()},
                    {"fill_values", prep.imputer.fill_values()},
                    {"companion_columns", prep.imputer.companion_columns()}};
    std::vector<int> constant_flags;
    for (const bool b : prep.standardization.constant) constant_flags.push_back(b ? 1 : 0);
    p["standardization"] = {{"means", prep.standardization.means},
                            {"sds", prep.standardization.sds},
                            {"constant", constant_flags}};
    j["preprocessing"] = std::move(p);
  }

  if (const auto* tree = std::get_if<TreeModel>(&model.payload)) {
    j["payload"] = {{"kind", "tree"}, {"nodes", tree_to_json(*tree)}};
  } else if (const auto* forest = std::get_if<ForestModel>(&model.payload)) {
    json trees = json::array();
    for (const auto& t : forest->trees) trees.push_back(tree_to_json(t));
    json cv = json::array();
    for (const auto& cell : forest->cv_table) {
      cv.push_back({{"trees", cell.trees},
                    {"depth", cell.depth},
                    {"mean_accuracy", cell.mean_accuracy}});
    }
    j["payload"] = {{"kind", "forest"},
                    {"trees", std::move(trees)},
                    {"chosen_trees", forest->chosen_trees},
                    {"chosen_depth", forest->chosen_depth},
                    {"cv_table", std::move(cv)}};
  } else if (const auto* linear = std::get_if<LinearModel>(&model.payload)) {
    j["payload"] = {{"kind", "linear"},
                    {"n_classes", linear->n_classes},
                    {"weights", linear->weights}};
  } else {
    const auto& mlp = std::get<MlpModel>(model.payload);
    json layers = json::array();
    for (const auto& layer : mlp.layers) {
      layers.push_back({{"in", layer.in},
                        {"out", layer.out},
                        {"weights", layer.weights},
                        {"bias", layer.bias}});
    }
    j["payload"] = {{"kind", "mlp"}, {"layers", std::move(layers)}};
  }

  j["meta"] = {{"loss_checkpoints", model.meta.loss_checkpoints},
               {"iterations", model.meta.iterations},
               {"notes", model.meta.notes}};
  j["provenance"] = model.provenance;
  return j.dump(2) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model JSON parse error: ") + e.what());
  }
  try {
    TrainedModel model;
    model.spec = spec_from_json(j.at("spec"));
    for (const auto& c : j.at("classes")) {
      model.classes.push_back(psych::label_from_slug(c.get<std::string>()));
    }
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();

    if (j.contains("preprocessing")) {
      const auto& p = j.at("preprocessing");
      Preprocessing prep;
      prep.imputer = Imputer::from_parts(
          p.at("imputer").at("input_names").get<std::vector<std::string>>(),
          p.at("imputer").at("fill_values").get<std::vector<double>>(),
          p.at("imputer").at("companion_columns").get<std::vector<std::size_t>>());
      prep.standardization.means =
          p.at("standardization").at("means").get<std::vector<double>>();
      prep.standardization.sds =
          p.at("standardization").at("sds").get<std::vector<double>>();
      for (const auto& flag : p.at("standardization").at("constant")) {
        prep.standardization.constant.push_back(flag.get<int>() != 0);
      }
      model.preprocessing = std::move(prep);
    }

    const auto& payload = j.at("payload");
    const auto kind = payload.at("kind").get<std::string>();
    if (kind == "tree") {
      model.payload = tree_from_json(payload.at("nodes"));
    } else if (kind == "forest") {
      ForestModel forest;
      for (const auto& t : payload.at("trees")) forest.trees.push_back(tree_from_json(t));
      forest.chosen_trees = payload.at("chosen_trees").get<std::size_t>();
      forest.chosen_depth = payload.at("chosen_depth").get<std::size_t>();
      for (const auto& cell : payload.at("cv_table")) {
        forest.cv_table.push_back(CvCell{cell.at("trees").get<std::size_t>(),
                                         cell.at("depth").get<std::size_t>(),
                                         cell.at("mean_accuracy").get<double>()});
      }
      model.payload = std::move(forest);
    } else if (kind == "linear") {
      LinearModel linear;
      linear.n_classes = payload.at("n_classes").get<std::size_t>();
      linear.weights = payload.at("weights").get<std::vector<std::vector<double>>>();
      model.payload = std::move(linear);
    } else if (kind == "mlp") {
      MlpModel mlp;
      for (const auto& l : payload.at("layers")) {
        MlpLayer layer;
        layer.in = l.at("in").get<std::size_t>();
        layer.out = l.at("out").get<std::size_t>();
        layer.weights = l.at("weights").get<std::vector<double>>();
        layer.bias = l.at("bias").get<std::vector<double>>();
        mlp.layers.push_back(std::move(layer));
      }
      model.payload = std::move(mlp);
    } else {
      throw SchemaError("unknown model payload kind: " + kind);
    }

    model.meta.loss_checkpoints =
        j.at("meta").at("loss_checkpoints").get<std::vector<double>>();
    model.meta.iterations = j.at("meta").at("iterations").get<std::size_t>();
    model.meta.notes = j.at("meta").at("notes").get<std::vector<std::string>>();
    model.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("model JSON field error: ") + e.what());
  }
}

}  // namespace traitpipe::learn
