#pragma once

#include <string_view>

// Bundled data files, compiled in by the build.
namespace bbranch::embedded {

std::string_view synonyms_json();
std::string_view rules_json();
std::string_view prompt_template();
std::string_view exemplars_jsonl();

}  // namespace bbranch::embedded
