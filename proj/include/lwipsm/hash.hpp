#pragma once

#include "lwipsm/bytes.hpp"

namespace lwipsm {

/// The credential hash H (SHA-256).
Digest sha256(ByteView data);
Digest sha256(ByteView a, ByteView b);

/// HMAC-SHA-256.
Digest hmac_sha256(ByteView key, ByteView message);

}  // namespace lwipsm
