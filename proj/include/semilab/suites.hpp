#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace semilab {

struct ScenarioConfig;
class GalerkinModel;
struct CheckRecord;

/// Suite names in execution order.
const std::vector<std::string>& suite_names();
bool is_suite_name(const std::string& name);

/// Runs one suite against the configured model. `seed` is the suite's own seed.
std::vector<CheckRecord> run_suite(const std::string& name, const ScenarioConfig& config, const GalerkinModel& model,
                                   std::uint64_t seed);

}  // namespace semilab
