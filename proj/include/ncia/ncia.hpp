#pragma once

#include "ncia/error.hpp"
#include "ncia/rng.hpp"
#include "ncia/config.hpp"
#include "ncia/phases.hpp"
#include "ncia/channel.hpp"
#include "ncia/align.hpp"
#include "ncia/modem.hpp"
#include "ncia/link.hpp"
