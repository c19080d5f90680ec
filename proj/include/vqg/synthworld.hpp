#pragma once

// Procedural desk-scale visual world: scene sampling, noisy multi-hot
// image features, templated question/answer generation per answer
// category, and an exact relevance oracle over the same templates.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vqg/common.hpp"
#include "vqg/templates_data.hpp"

namespace vqg::synthworld {

using nlohmann::json;

// ====================================================================
//  World configuration
// ====================================================================

struct WorldConfig {
  std::vector<std::string> object_types = {
      "cube", "sphere", "cylinder", "cone", "pyramid", "block", "ball",
      "disk", "ring",   "prism",    "mug",  "book",    "lamp",  "clock",
      "vase", "plate",  "bottle",   "tray", "bowl",    "brick"};
  std::vector<std::string> colors = {"red",    "blue",   "green", "yellow",
                                     "purple", "orange", "gray",  "brown"};
  std::vector<std::string> materials = {"metal", "wood",   "plastic",
                                        "glass", "rubber", "stone"};
  std::vector<std::string> attributes = {"shiny", "dull",  "large",  "small",
                                         "heavy", "light", "smooth", "rough"};
  int max_objects_per_scene = 4;
  int max_count = 5;
  double feature_noise_std = 0.05;
  std::vector<std::string> categories = {"object",    "color",    "material",
                                         "attribute", "counting", "binary"};

  int feature_dim() const {
    return static_cast<int>(object_types.size() + colors.size() + materials.size() +
                            attributes.size()) +
           max_count;
  }

  int category_index(const std::string& c) const {
    for (std::size_t i = 0; i < categories.size(); ++i)
      if (categories[i] == c) return static_cast<int>(i);
    return -1;
  }

  json to_json() const {
    return json{{"object_types", object_types},
                {"colors", colors},
                {"materials", materials},
                {"attributes", attributes},
                {"max_objects_per_scene", max_objects_per_scene},
                {"max_count", max_count},
                {"feature_noise_std", feature_noise_std},
                {"categories", categories}};
  }

  static WorldConfig from_json(const json& j) {
    WorldConfig c;
    if (j.contains("object_types")) c.object_types = j.at("object_types").get<std::vector<std::string>>();
    if (j.contains("colors")) c.colors = j.at("colors").get<std::vector<std::string>>();
    if (j.contains("materials")) c.materials = j.at("materials").get<std::vector<std::string>>();
    if (j.contains("attributes")) c.attributes = j.at("attributes").get<std::vector<std::string>>();
    if (j.contains("max_objects_per_scene")) c.max_objects_per_scene = j.at("max_objects_per_scene").get<int>();
    if (j.contains("max_count")) c.max_count = j.at("max_count").get<int>();
    if (j.contains("feature_noise_std")) c.feature_noise_std = j.at("feature_noise_std").get<double>();
    if (j.contains("categories")) c.categories = j.at("categories").get<std::vector<std::string>>();
    return c;
  }

  std::string config_hash() const { return to_hex(fnv1a64(to_json().dump())); }
};

namespace detail {

inline bool duplicate_free(const std::vector<std::string>& v) {
  std::set<std::string> s(v.begin(), v.end());
  return s.size() == v.size();
}

inline bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace detail

// ====================================================================
//  Scene
// ====================================================================

struct SceneObject {
  std::string type;
  std::string color;
  std::string material;
  std::string attribute;
  int count = 1;
};

struct Scene {
  std::string scene_id;
  std::vector<SceneObject> objects;

  const SceneObject* find_type(const std::string& t) const {
    for (const auto& o : objects)
      if (o.type == t) return &o;
    return nullptr;
  }

  json to_json() const {
    json objs = json::array();
    for (const auto& o : objects)
      objs.push_back(json{{"type", o.type},
                          {"color", o.color},
                          {"material", o.material},
                          {"attribute", o.attribute},
                          {"count", o.count}});
    return json{{"scene_id", scene_id}, {"objects", objs}};
  }

  static Scene from_json(const json& j) {
    Scene s;
    s.scene_id = j.at("scene_id").get<std::string>();
    for (const auto& oj : j.at("objects")) {
      SceneObject o;
      o.type = oj.at("type").get<std::string>();
      o.color = oj.at("color").get<std::string>();
      o.material = oj.at("material").get<std::string>();
      o.attribute = oj.at("attribute").get<std::string>();
      o.count = oj.at("count").get<int>();
      s.objects.push_back(std::move(o));
    }
    return s;
  }
};

struct RelevanceVerdict {
  bool answerable = false;
  std::optional<std::string> matched_category;
  std::optional<std::string> oracle_answer;
};

// ====================================================================
//  Templates
// ====================================================================

enum class AnswerRule {
  kColorOfType,
  kMaterialOfType,
  kAttributeOfType,
  kTypeOfColor,
  kTypeOfMaterial,
  kCountOfType,
  kPresenceOfType,
  kPresenceOfColoredType,
};

struct QuestionTemplate {
  std::string category;
  std::vector<std::string> pattern;  // tokens; slots in braces
  AnswerRule rule;
};

inline AnswerRule parse_rule(const std::string& s) {
  if (s == "color_of_type") return AnswerRule::kColorOfType;
  if (s == "material_of_type") return AnswerRule::kMaterialOfType;
  if (s == "attribute_of_type") return AnswerRule::kAttributeOfType;
  if (s == "type_of_color") return AnswerRule::kTypeOfColor;
  if (s == "type_of_material") return AnswerRule::kTypeOfMaterial;
  if (s == "count_of_type") return AnswerRule::kCountOfType;
  if (s == "presence_of_type") return AnswerRule::kPresenceOfType;
  if (s == "presence_of_colored_type") return AnswerRule::kPresenceOfColoredType;
  throw ConfigError("unknown answer rule in template inventory: " + s);
}

inline const std::vector<QuestionTemplate>& template_inventory() {
  static const std::vector<QuestionTemplate> inv = [] {
    std::vector<QuestionTemplate> out;
    const json doc = json::parse(kTemplateInventoryJson);
    for (const auto& tj : doc.at("templates")) {
      QuestionTemplate t;
      t.category = tj.at("category").get<std::string>();
      t.pattern = tokenize(tj.at("pattern").get<std::string>());
      t.rule = parse_rule(tj.at("answer").get<std::string>());
      out.push_back(std::move(t));
    }
    return out;
  }();
  return inv;
}

inline int template_inventory_version() {
  static const int v = json::parse(kTemplateInventoryJson).at("version").get<int>();
  return v;
}

// fixed (non-slot) words across all templates; concept names must stay
// disjoint from these or the oracle's parse becomes ambiguous
inline const std::set<std::string>& template_lexicon() {
  static const std::set<std::string> lex = [] {
    std::set<std::string> out;
    for (const auto& t : template_inventory())
      for (const auto& tok : t.pattern)
        if (tok.front() != '{') out.insert(tok);
    return out;
  }();
  return lex;
}

// ====================================================================
//  Validation
// ====================================================================

inline void validate_config(const WorldConfig& c) {
  auto check_list = [](const std::vector<std::string>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string(name) + " list is empty");
    if (!detail::duplicate_free(v)) throw ConfigError(std::string(name) + " list has duplicates");
  };
  check_list(c.object_types, "object_types");
  check_list(c.colors, "colors");
  check_list(c.materials, "materials");
  check_list(c.attributes, "attributes");
  check_list(c.categories, "categories");
  if (c.max_objects_per_scene < 1) throw ConfigError("max_objects_per_scene must be >= 1");
  if (c.max_objects_per_scene > static_cast<int>(c.object_types.size()))
    throw ConfigError("max_objects_per_scene exceeds number of object types");
  if (c.max_count < 1) throw ConfigError("max_count must be >= 1");
  if (c.feature_noise_std < 0.0) throw ConfigError("feature_noise_std must be >= 0");
  for (const auto& cat : c.categories) {
    bool found = false;
    for (const auto& t : template_inventory())
      if (t.category == cat) found = true;
    if (!found) throw ConfigError("category without templates: " + cat);
  }
  const auto& lex = template_lexicon();
  auto check_disjoint = [&lex](const std::vector<std::string>& v, const char* name) {
    for (const auto& w : v)
      if (lex.count(w))
        throw ConfigError(std::string(name) + " entry collides with template word: " + w);
  };
  check_disjoint(c.object_types, "object_types");
  check_disjoint(c.colors, "colors");
  check_disjoint(c.materials, "materials");
  check_disjoint(c.attributes, "attributes");
}

inline void validate_scene(const Scene& s, const WorldConfig& c) {
  if (s.objects.empty() || static_cast<int>(s.objects.size()) > c.max_objects_per_scene)
    throw SchemaError("scene object count out of range");
  std::set<std::string> types;
  for (const auto& o : s.objects) {
    if (!detail::contains(c.object_types, o.type)) throw SchemaError("unknown type: " + o.type);
    if (!detail::contains(c.colors, o.color)) throw SchemaError("unknown color: " + o.color);
    if (!detail::contains(c.materials, o.material))
      throw SchemaError("unknown material: " + o.material);
    if (!detail::contains(c.attributes, o.attribute))
      throw SchemaError("unknown attribute: " + o.attribute);
    if (o.count < 1 || o.count > c.max_count) throw SchemaError("count out of range");
    if (!types.insert(o.type).second) throw SchemaError("duplicate object type in scene");
  }
}

// ====================================================================
//  Sampling
// ====================================================================

inline Scene sample_scene(const WorldConfig& config, std::uint64_t seed) {
  validate_config(config);
  Rng rng(seed);
  Scene s;
  s.scene_id = "s" + to_hex(seed);
  const int n = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(config.max_objects_per_scene)));
  // distinct types: draw without replacement
  std::vector<std::string> pool = config.object_types;
  rng.shuffle(pool);
  for (int i = 0; i < n; ++i) {
    SceneObject o;
    o.type = pool[static_cast<std::size_t>(i)];
    o.color = config.colors[rng.uniform_int(config.colors.size())];
    o.material = config.materials[rng.uniform_int(config.materials.size())];
    o.attribute = config.attributes[rng.uniform_int(config.attributes.size())];
    o.count = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(config.max_count)));
    s.objects.push_back(std::move(o));
  }
  return s;
}

// Multi-hot of every concept present plus one-hot of the max
// per-object count, with additive Gaussian noise.
inline std::vector<double> render_features(const Scene& scene, const WorldConfig& config,
                                           std::uint64_t seed) {
  validate_scene(scene, config);
  const int d = config.feature_dim();
  std::vector<double> f(static_cast<std::size_t>(d), 0.0);
  auto index_of = [](const std::vector<std::string>& v, const std::string& x) {
    return static_cast<int>(std::find(v.begin(), v.end(), x) - v.begin());
  };
  const int t0 = 0;
  const int c0 = t0 + static_cast<int>(config.object_types.size());
  const int m0 = c0 + static_cast<int>(config.colors.size());
  const int a0 = m0 + static_cast<int>(config.materials.size());
  const int n0 = a0 + static_cast<int>(config.attributes.size());
  int max_count = 0;
  for (const auto& o : scene.objects) {
    f[static_cast<std::size_t>(t0 + index_of(config.object_types, o.type))] = 1.0;
    f[static_cast<std::size_t>(c0 + index_of(config.colors, o.color))] = 1.0;
    f[static_cast<std::size_t>(m0 + index_of(config.materials, o.material))] = 1.0;
    f[static_cast<std::size_t>(a0 + index_of(config.attributes, o.attribute))] = 1.0;
    max_count = std::max(max_count, o.count);
  }
  f[static_cast<std::size_t>(n0 + max_count - 1)] = 1.0;
  if (config.feature_noise_std > 0.0) {
    Rng rng(seed);
    for (auto& x : f) x += rng.normal(0.0, config.feature_noise_std);
  }
  return f;
}

// ====================================================================
//  Question generation
// ====================================================================

namespace detail {

// colors/materials carried by exactly one object identify that object
inline std::vector<std::string> unique_values(const Scene& s,
                                              const std::string SceneObject::*field) {
  std::map<std::string, int> counts;
  for (const auto& o : s.objects) ++counts[o.*field];
  std::vector<std::string> out;
  for (const auto& [v, n] : counts)
    if (n == 1) out.push_back(v);
  return out;
}

inline std::string instantiate(const std::vector<std::string>& pattern,
                               const std::map<std::string, std::string>& fillers) {
  std::vector<std::string> toks;
  for (const auto& t : pattern) {
    if (t.front() == '{')
      toks.push_back(fillers.at(t));
    else
      toks.push_back(t);
  }
  return join_tokens(toks);
}

}  // namespace detail

struct QaPair {
  std::vector<std::string> question;
  std::vector<std::string> answer;
};

// Returns a question/answer instantiation of one of the category's
// templates, or nullopt when no template applies to the scene.
inline std::optional<QaPair> generate_qa(const Scene& scene, const WorldConfig& config,
                                         const std::string& category, std::uint64_t seed) {
  validate_scene(scene, config);
  if (config.category_index(category) < 0)
    throw ConfigError("unknown category: " + category);
  Rng rng(seed);

  struct Option {
    const QuestionTemplate* tpl;
    std::map<std::string, std::string> fillers;
    std::string answer;
  };
  std::vector<Option> options;

  auto pick = [&rng](const auto& v) { return v[rng.uniform_int(v.size())]; };

  for (const auto& t : template_inventory()) {
    if (t.category != category) continue;
    switch (t.rule) {
      case AnswerRule::kColorOfType: {
        const auto& o = pick(scene.objects);
        options.push_back({&t, {{"{type}", o.type}}, o.color});
        break;
      }
      case AnswerRule::kMaterialOfType: {
        const auto& o = pick(scene.objects);
        options.push_back({&t, {{"{type}", o.type}}, o.material});
        break;
      }
      case AnswerRule::kAttributeOfType: {
        const auto& o = pick(scene.objects);
        options.push_back({&t, {{"{type}", o.type}}, o.attribute});
        break;
      }
      case AnswerRule::kCountOfType: {
        const auto& o = pick(scene.objects);
        options.push_back({&t, {{"{types}", o.type + "s"}}, std::to_string(o.count)});
        break;
      }
      case AnswerRule::kTypeOfColor: {
        const auto unique = detail::unique_values(scene, &SceneObject::color);
        if (unique.empty()) break;
        const std::string color = pick(unique);
        const SceneObject* obj = nullptr;
        for (const auto& o : scene.objects)
          if (o.color == color) obj = &o;
        options.push_back({&t, {{"{color}", color}}, obj->type});
        break;
      }
      case AnswerRule::kTypeOfMaterial: {
        const auto unique = detail::unique_values(scene, &SceneObject::material);
        if (unique.empty()) break;
        const std::string mat = pick(unique);
        const SceneObject* obj = nullptr;
        for (const auto& o : scene.objects)
          if (o.material == mat) obj = &o;
        options.push_back({&t, {{"{material}", mat}}, obj->type});
        break;
      }
      case AnswerRule::kPresenceOfType: {
        const bool positive = rng.uniform() < 0.5;
        if (positive) {
          options.push_back({&t, {{"{anytype}", pick(scene.objects).type}}, "yes"});
        } else {
          std::vector<std::string> absent;
          for (const auto& ty : config.object_types)
            if (!scene.find_type(ty)) absent.push_back(ty);
          if (absent.empty())
            options.push_back({&t, {{"{anytype}", pick(scene.objects).type}}, "yes"});
          else
            options.push_back({&t, {{"{anytype}", pick(absent)}}, "no"});
        }
        break;
      }
      case AnswerRule::kPresenceOfColoredType: {
        const bool positive = rng.uniform() < 0.5;
        if (positive) {
          const auto& o = pick(scene.objects);
          options.push_back({&t, {{"{anycolor}", o.color}, {"{anytype}", o.type}}, "yes"});
        } else {
          // rejection-sample a (color, type) pair absent from the scene;
          // the pair space is far larger than any scene so this terminates
          for (int tries = 0; tries < 256; ++tries) {
            const std::string color = pick(config.colors);
            const std::string type = pick(config.object_types);
            const SceneObject* o = scene.find_type(type);
            if (o && o->color == color) continue;
            options.push_back({&t, {{"{anycolor}", color}, {"{anytype}", type}}, "no"});
            break;
          }
        }
        break;
      }
    }
  }

  if (options.empty()) return std::nullopt;
  const Option& chosen = options[rng.uniform_int(options.size())];
  QaPair qa;
  qa.question = tokenize(detail::instantiate(chosen.tpl->pattern, chosen.fillers));
  qa.answer = tokenize(chosen.answer);
  return qa;
}

// ====================================================================
//  Relevance oracle
// ====================================================================

// Exact template matcher: a question is answerable iff some template
// matches token-for-token and its slot fillers check out against the
// scene (or, for binary presence templates, against the vocabulary).
inline RelevanceVerdict check_relevance(const std::vector<std::string>& question,
                                        const Scene& scene, const WorldConfig& config) {
  for (const auto& t : template_inventory()) {
    if (question.size() != t.pattern.size()) continue;
    std::map<std::string, std::string> fillers;
    bool match = true;
    for (std::size_t i = 0; i < t.pattern.size(); ++i) {
      if (t.pattern[i].front() == '{')
        fillers[t.pattern[i]] = question[i];
      else if (t.pattern[i] != question[i]) {
        match = false;
        break;
      }
    }
    if (!match) continue;

    auto verdict = [&t](const std::string& answer) {
      return RelevanceVerdict{true, t.category, answer};
    };

    switch (t.rule) {
      case AnswerRule::kColorOfType: {
        const SceneObject* o = scene.find_type(fillers.at("{type}"));
        if (o) return verdict(o->color);
        break;
      }
      case AnswerRule::kMaterialOfType: {
        const SceneObject* o = scene.find_type(fillers.at("{type}"));
        if (o) return verdict(o->material);
        break;
      }
      case AnswerRule::kAttributeOfType: {
        const SceneObject* o = scene.find_type(fillers.at("{type}"));
        if (o) return verdict(o->attribute);
        break;
      }
      case AnswerRule::kCountOfType: {
        const std::string& plural = fillers.at("{types}");
        for (const auto& o : scene.objects)
          if (o.type + "s" == plural) return verdict(std::to_string(o.count));
        break;
      }
      case AnswerRule::kTypeOfColor: {
        const std::string& color = fillers.at("{color}");
        if (!detail::contains(config.colors, color)) break;
        const SceneObject* found = nullptr;
        int n = 0;
        for (const auto& o : scene.objects)
          if (o.color == color) {
            found = &o;
            ++n;
          }
        if (n == 1) return verdict(found->type);  // ambiguous reference otherwise
        break;
      }
      case AnswerRule::kTypeOfMaterial: {
        const std::string& mat = fillers.at("{material}");
        if (!detail::contains(config.materials, mat)) break;
        const SceneObject* found = nullptr;
        int n = 0;
        for (const auto& o : scene.objects)
          if (o.material == mat) {
            found = &o;
            ++n;
          }
        if (n == 1) return verdict(found->type);
        break;
      }
      case AnswerRule::kPresenceOfType: {
        const std::string& type = fillers.at("{anytype}");
        if (!detail::contains(config.object_types, type)) break;
        return verdict(scene.find_type(type) ? "yes" : "no");
      }
      case AnswerRule::kPresenceOfColoredType: {
        const std::string& color = fillers.at("{anycolor}");
        const std::string& type = fillers.at("{anytype}");
        if (!detail::contains(config.colors, color) ||
            !detail::contains(config.object_types, type))
          break;
        const SceneObject* o = scene.find_type(type);
        return verdict(o && o->color == color ? "yes" : "no");
      }
    }
  }
  return {};
}

// ====================================================================
//  Dataset emission
// ====================================================================

struct DatasetManifest {
  int n = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::map<std::string, int> category_counts;

  json to_json() const {
    return json{{"n", n},
                {"seed", seed},
                {"config_hash", config_hash},
                {"category_counts", category_counts}};
  }
};

// One JSONL record per example; category drawn uniformly per record and
// scenes rejection-sampled until the category applies.
inline DatasetManifest emit_dataset(int n, const WorldConfig& config, std::uint64_t seed,
                                    const std::string& path) {
  if (n < 1) throw ConfigError("emit_dataset: n must be >= 1");
  validate_config(config);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  DatasetManifest manifest;
  manifest.n = n;
  manifest.seed = seed;
  manifest.config_hash = config.config_hash();
  for (const auto& c : config.categories) manifest.category_counts[c] = 0;

  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const std::string category = config.categories[rng.uniform_int(config.categories.size())];
    Scene scene;
    std::optional<QaPair> qa;
    while (!qa) {
      scene = sample_scene(config, rng.fork_seed());
      qa = generate_qa(scene, config, category, rng.fork_seed());
    }
    const auto features = render_features(scene, config, rng.fork_seed());
    json rec{{"id", "ex" + std::to_string(i)},
             {"features", features},
             {"question", join_tokens(qa->question)},
             {"answer", join_tokens(qa->answer)},
             {"category", category},
             {"scene", scene.to_json()}};
    out << rec.dump() << "\n";
    ++manifest.category_counts[category];
  }
  if (!out) throw IoError("write failure: " + path);
  return manifest;
}

}  // namespace vqg::synthworld
