#pragma once

#include <string_view>
#include <utility>
#include <vector>

namespace gear::detail {

// Generated at configure time from plans/*.json.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_plan_documents();

}  // namespace gear::detail
