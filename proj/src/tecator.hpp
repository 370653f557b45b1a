#pragma once

#include <string>

#include "spectra.hpp"

namespace specrange {

// Canonical source of the Tecator meat-sample distribution.
inline constexpr const char* kTecatorDefaultUrl = "http://lib.stat.cmu.edu/datasets/tecator";

// Number of samples/variables the published file must contain.
inline constexpr int kTecatorSamples = 215;   // 172 train + 43 test
inline constexpr int kTecatorTrain = 172;
inline constexpr int kTecatorVars = 100;

// Downloads (or reuses a cached copy of) the StatLib Tecator distribution and
// parses it into a SpectraSet: the 100 absorbance channels over 850-1050 nm
// and the fat content as target. The url may also be a local path or a
// file:// reference to an already-downloaded copy. Raw bytes are cached under
// <cache_dir>/tecator/raw.dat with a JSON sidecar; the cache is only written
// after a successful parse, and offline runs reuse it.
SpectraSet fetch_tecator(const std::string& url, const std::string& cache_dir);

// Parses the raw StatLib file contents (prose banner + numeric block).
SpectraSet parse_tecator(const std::string& raw, const std::string& origin);

// The split published with the dataset: first 172 samples train, last 43 test.
SplitSpec tecator_split();

}  // namespace specrange
