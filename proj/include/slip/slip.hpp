#pragma once

#include "slip/attack.hpp"
#include "slip/backend.hpp"
#include "slip/campaign.hpp"
#include "slip/config.hpp"
#include "slip/dataset.hpp"
#include "slip/error.hpp"
#include "slip/hash.hpp"
#include "slip/label_space.hpp"
#include "slip/metrics.hpp"
#include "slip/prompt.hpp"
#include "slip/rng.hpp"
#include "slip/simulator.hpp"
#include "slip/soft_label.hpp"
#include "slip/text_util.hpp"
#include "slip/trace.hpp"
#include "slip/version.hpp"
