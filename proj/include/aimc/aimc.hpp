#ifndef AIMC_AIMC_HPP
#define AIMC_AIMC_HPP

#include <aimc/analysis.hpp>
#include <aimc/checkpoint.hpp>
#include <aimc/config.hpp>
#include <aimc/csv.hpp>
#include <aimc/datasets.hpp>
#include <aimc/desk.hpp>
#include <aimc/hwa.hpp>
#include <aimc/ir_drop.hpp>
#include <aimc/mapping.hpp>
#include <aimc/parallel.hpp>
#include <aimc/pcm_device.hpp>
#include <aimc/quantize.hpp>
#include <aimc/random.hpp>
#include <aimc/tensor_io.hpp>
#include <aimc/tile.hpp>

#endif // AIMC_AIMC_HPP
