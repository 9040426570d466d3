#pragma once

#include "metairl/config.hpp"
#include "metairl/demos.hpp"
#include "metairl/error.hpp"
#include "metairl/eval.hpp"
#include "metairl/io.hpp"
#include "metairl/losses.hpp"
#include "metairl/mdp.hpp"
#include "metairl/rng.hpp"
#include "metairl/terrain.hpp"
#include "metairl/trainer.hpp"
#include "metairl/vrfn.hpp"
