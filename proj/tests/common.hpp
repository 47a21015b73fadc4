#ifndef STATEFUZZ_TESTS_COMMON_HPP
#define STATEFUZZ_TESTS_COMMON_HPP

#include <string>

#include "statefuzz/statefuzz.hpp"

namespace sfx {

inline statefuzz::fs::path source_dir() { return STATEFUZZ_SOURCE_DIR; }

inline std::string slurp(const std::string& rel) { return statefuzz::read_file(source_dir() / rel); }

inline statefuzz::FuzzSpecification load_spec(const std::string& name)
{
    return statefuzz::parse_fuzz_spec(slurp("specs/" + name + ".json"), name);
}

inline statefuzz::MissionPlan load_mission(const std::string& name)
{
    return statefuzz::parse_mission(slurp("specs/missions/" + name + ".json"));
}

inline statefuzz::MissionSet missions(std::initializer_list<const char*> names)
{
    statefuzz::MissionSet out;
    for (auto n : names) {
        auto m = load_mission(n);
        out[m.id] = std::make_shared<const statefuzz::MissionPlan>(m);
    }
    return out;
}

inline statefuzz::SutConfig with_faults(std::initializer_list<statefuzz::FaultId> faults)
{
    statefuzz::SutConfig c;
    c.seeded_faults = faults;
    return c;
}

inline statefuzz::fs::path scratch(const std::string& name)
{
    auto p = statefuzz::fs::temp_directory_path() / ("statefuzz-test-" + name);
    statefuzz::fs::remove_all(p);
    return p;
}

} // namespace sfx

#endif
