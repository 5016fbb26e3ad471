#include "gcst/types.hpp"

#include <set>

namespace gcst {

std::string render_label_prompt(const std::string& description,
                                PromptTemplate tpl) {
  if (description.empty()) {
    throw_invalid("render_label_prompt: empty label description");
  }
  switch (tpl) {
    case PromptTemplate::category:
      return "Category: " + description + ".";
    case PromptTemplate::about:
      return "It is about " + description + ".";
  }
  throw_invalid("render_label_prompt: unknown template");
}

LabelSchema make_schema(const std::vector<std::string>& descriptions,
                        PromptTemplate tpl) {
  LabelSchema schema;
  schema.descriptions = descriptions;
  schema.prompts.reserve(descriptions.size());
  for (const auto& d : descriptions) {
    schema.prompts.push_back(render_label_prompt(d, tpl));
  }
  validate_schema(schema);
  return schema;
}

void validate_schema(const LabelSchema& schema) {
  if (schema.descriptions.size() != schema.prompts.size()) {
    throw_invalid("schema: descriptions and prompts differ in length");
  }
  if (schema.count() < 2) {
    throw_invalid("schema: at least two labels required");
  }
  std::set<std::string> seen;
  for (const auto& d : schema.descriptions) {
    if (d.empty()) {
      throw_invalid("schema: empty label description");
    }
    if (!seen.insert(d).second) {
      throw_invalid("schema: duplicate label description '" + d + "'");
    }
  }
  for (const auto& p : schema.prompts) {
    if (p.empty()) {
      throw_invalid("schema: empty label prompt");
    }
  }
}

int argmax_lowest_index(const Eigen::VectorXd& values) {
  int best = 0;
  for (int i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) {
      best = i;
    }
  }
  return best;
}

}  // namespace gcst
