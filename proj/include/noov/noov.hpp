#pragma once

#include "noov/error.hpp"
#include "noov/text.hpp"
#include "noov/random.hpp"
#include "noov/corpus.hpp"
#include "noov/align.hpp"
#include "noov/phrasebook.hpp"
#include "noov/neural.hpp"
#include "noov/network.hpp"
#include "noov/model.hpp"
#include "noov/checkpoint.hpp"
#include "noov/decode.hpp"
#include "noov/eval.hpp"
