#pragma once

// Question template inventory, version-stamped. Treated as data: the
// generator and the relevance oracle both parse this JSON document, so
// the two sides can never drift apart. Slot kinds:
//   {type}      a type present in the scene
//   {types}     plural of a type present in the scene
//   {color}     a color carried by exactly one object in the scene
//   {material}  a material carried by exactly one object in the scene
//   {anytype}   any type from the world vocabulary
//   {anycolor}  any color from the world vocabulary

namespace vqg::synthworld {

inline constexpr const char* kTemplateInventoryJson = R"JSON({
  "version": 1,
  "templates": [
    {"category": "color",     "pattern": "what color is the {type} ?",            "answer": "color_of_type"},
    {"category": "color",     "pattern": "which color does the {type} have ?",    "answer": "color_of_type"},
    {"category": "material",  "pattern": "what material is the {type} made of ?", "answer": "material_of_type"},
    {"category": "material",  "pattern": "which material is the {type} ?",        "answer": "material_of_type"},
    {"category": "attribute", "pattern": "what attribute does the {type} have ?", "answer": "attribute_of_type"},
    {"category": "attribute", "pattern": "how does the {type} look ?",            "answer": "attribute_of_type"},
    {"category": "object",    "pattern": "which object is {color} ?",             "answer": "type_of_color"},
    {"category": "object",    "pattern": "what object is made of {material} ?",   "answer": "type_of_material"},
    {"category": "counting",  "pattern": "how many {types} are there ?",          "answer": "count_of_type"},
    {"category": "counting",  "pattern": "what number of {types} can you see ?",  "answer": "count_of_type"},
    {"category": "binary",    "pattern": "is there a {anytype} ?",                "answer": "presence_of_type"},
    {"category": "binary",    "pattern": "is there a {anycolor} {anytype} ?",     "answer": "presence_of_colored_type"}
  ]
})JSON";

}  // namespace vqg::synthworld
