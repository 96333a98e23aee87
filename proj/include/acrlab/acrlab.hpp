#pragma once

// Umbrella header.

#include "acrlab/acr.hpp"
#include "acrlab/bias.hpp"
#include "acrlab/campaign.hpp"
#include "acrlab/config.hpp"
#include "acrlab/corpus.hpp"
#include "acrlab/defense.hpp"
#include "acrlab/diff.hpp"
#include "acrlab/errors.hpp"
#include "acrlab/framing.hpp"
#include "acrlab/gateway.hpp"
#include "acrlab/repo.hpp"
#include "acrlab/stats.hpp"
#include "acrlab/store.hpp"
#include "acrlab/util.hpp"

namespace acrlab {
inline constexpr const char* kVersion = "0.1.0";
}
