#pragma once

#include <array>
#include <string_view>

namespace fixtures {

// Four production lines: two malformed (a ", " inside the path), two valid.
// The second keeps its double space before the size.
inline constexpr std::array<std::string_view, 4> kSampleLines = {
    "0.017, 118.69.133.153, -, [03/Dec/2018:00:00:00 +0700], /img_songs/Nonstop, TONNY",
    "0.136, 118.68.222.40, MISS, [03/Dec/2018:00:00:00 +0700], /38f16b08fd/dongthap1tv-mid-5803464.ts,  437664",
    "0.019, 118.69.133.153, -, [03/Dec/2018:00:00:00 +0700], /img_songs/Nonstop, ",
    "0.000, 1.52.122.25, HIT, [03/Dec/2018:00:00:00, +0700], "
    "/live/prod_kplus_pm_hd-audio_vie=56000-video=2499968.m3u8, 0",
};

inline constexpr std::string_view kCanonicalLine =
    "0.136, 118.68.222.40, MISS, [03/Dec/2018:00:00:00 +0700], /38f16b08fd/dongthap1tv-mid-5803464.ts, 437664";

}  // namespace fixtures
