#pragma once

#include "vdgpt/grounding/attention.hpp"
#include "vdgpt/grounding/checkpoint.hpp"
#include "vdgpt/grounding/diffusion.hpp"
#include "vdgpt/grounding/embedding.hpp"
#include "vdgpt/grounding/mlp.hpp"
#include "vdgpt/grounding/rng.hpp"
#include "vdgpt/grounding/sampler.hpp"
#include "vdgpt/grounding/scene_tokens.hpp"
#include "vdgpt/grounding/toy_model.hpp"
#include "vdgpt/grounding/training.hpp"
