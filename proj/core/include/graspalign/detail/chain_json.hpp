#pragma once

#include <json.hpp>

#include <graspalign/kinematics.hpp>

namespace graspalign::detail {

ChainSpec chain_from_json(const nlohmann::json& j);
nlohmann::json chain_to_json(const ChainSpec& chain);

}  // namespace graspalign::detail
