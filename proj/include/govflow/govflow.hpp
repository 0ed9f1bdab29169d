#pragma once

#include "govflow/model.hpp"
#include "govflow/dsl.hpp"
#include "govflow/flow.hpp"
#include "govflow/provenance.hpp"
#include "govflow/reasoner.hpp"
#include "govflow/synth.hpp"
