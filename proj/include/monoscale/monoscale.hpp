#pragma once

// Everything in one include.

#include "monoscale/bandit.hpp"
#include "monoscale/config.hpp"
#include "monoscale/errors.hpp"
#include "monoscale/eval.hpp"
#include "monoscale/instance_gen.hpp"
#include "monoscale/io.hpp"
#include "monoscale/learn.hpp"
#include "monoscale/memory_json.hpp"
#include "monoscale/presets.hpp"
#include "monoscale/rng.hpp"
#include "monoscale/router.hpp"
#include "monoscale/run_directory.hpp"
#include "monoscale/stages.hpp"
#include "monoscale/synth.hpp"
#include "monoscale/verify.hpp"
#include "monoscale/world.hpp"
