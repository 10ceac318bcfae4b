#pragma once

#include <string>

#include "loopverify/loopverify.hpp"

namespace testsupport {

inline std::string fixture(const std::string& name) { return std::string(FIXTURES_DIR) + "/" + name; }

inline loopverify::Domain domain(const std::string& name) { return loopverify::load_domain(fixture(name + ".json")); }

inline loopverify::Controller controller(const std::string& name)
{
    return loopverify::load_controller(fixture(name + ".json"));
}

inline loopverify::WorldState world(const loopverify::Domain& d, const std::string& json_text)
{
    return loopverify::state_from_json(nlohmann::json::parse(json_text), d);
}

inline loopverify::Formula formula(const loopverify::Domain& d, const std::string& text)
{
    return loopverify::parse_formula(text, d);
}

inline loopverify::ActionId action(const loopverify::Domain& d, const std::string& name) { return *d.find_action(name); }

} // namespace testsupport
