#pragma once

#include <string>

#include "relapse/forest.hpp"
#include "relapse/logistic.hpp"

namespace relapse {

// Audit/reload serialization; reloaded models predict bit-identically.
std::string logistic_to_json(const LogisticModel& model);
LogisticModel logistic_from_json(const std::string& text);

std::string forest_to_json(const RandomForestModel& model);
RandomForestModel forest_from_json(const std::string& text);

}  // namespace relapse
