#pragma once

#include <functional>
#include <string>
#include <vector>

// Every seeded-oracle comparison in one registry, shared between the unit
// suite and the acceptance suite. A check passes when the module path agrees
// with its independent brute-force oracle at the stated tolerance.
struct DerivedCheck {
    std::string name;
    std::function<bool()> run;
};

const std::vector<DerivedCheck>& all_derived_checks();
