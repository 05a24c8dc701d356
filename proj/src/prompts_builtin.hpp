#pragma once

#include <map>
#include <string>

namespace dtcrs::detail {

/// Template name -> text, compiled from the prompts/ directory.
std::map<std::string, std::string> builtin_prompts();

}  // namespace dtcrs::detail
