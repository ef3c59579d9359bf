#pragma once

#include <cstddef>
#include <cstdint>

namespace latentnav {

// CRC-32 (IEEE 802.3 polynomial), used for dataset and checkpoint integrity.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

}  // namespace latentnav
