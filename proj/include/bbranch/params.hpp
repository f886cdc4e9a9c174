#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>

namespace bbranch {

using ParamValue = std::variant<double, std::string>;
using Params = std::map<std::string, ParamValue>;

std::optional<double> number_param(const Params& params, const std::string& name);
std::optional<std::string> string_param(const Params& params, const std::string& name);

}  // namespace bbranch
