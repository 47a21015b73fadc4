#ifndef STATEFUZZ_STATEFUZZ_HPP
#define STATEFUZZ_STATEFUZZ_HPP

// Everything, in dependency order.
#include "statefuzz/error.hpp"
#include "statefuzz/vocabulary.hpp"
#include "statefuzz/geometry.hpp"
#include "statefuzz/random.hpp"
#include "statefuzz/fuzzspec.hpp"
#include "statefuzz/sutmodel.hpp"
#include "statefuzz/executor.hpp"
#include "statefuzz/testgen.hpp"
#include "statefuzz/oracle.hpp"
#include "statefuzz/analysis.hpp"
#include "statefuzz/cutset.hpp"
#include "statefuzz/campaign.hpp"

#endif // STATEFUZZ_STATEFUZZ_HPP
