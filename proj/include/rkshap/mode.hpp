#pragma once

#include <string>
#include <string_view>

namespace rkshap {

// Which value function removes absent features: the marginal (interventional)
// or the conditional distribution given present features (observational).
enum class Mode { interventional, observational };

// "isv" / "osv"
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

}  // namespace rkshap
