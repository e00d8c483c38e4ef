#pragma once

#include "fdx/runtime/scripted.hpp"

namespace fdx::runtime {

// Time-division baseline: one stream alternating a listen chunk L_j and a
// speak chunk S_j of chunk_frames positions each. L_j holds the user audio of
// block j; S_j holds the assistant tokens of block j, generated after hearing
// L_j, so they play back during block j+1.
//
// Serialized form of a parallel timeline, padded with fill frames to whole
// blocks: 2 * chunk_frames * ceil(|t| / chunk_frames) positions. Listen
// positions carry SIL/WAIT/NOOP on the model side; speak positions carry SIL
// on the listen side. Visual ids follow the source frame.
Timeline tdm_serialize(const Timeline& t, int chunk_frames);

struct TdmRun {
    SessionRun run;  // trace of the played output, one entry per feed frame
    int positions = 0;  // sequence positions consumed
};

// Drives a TDM-trained model over the feed and measures the played trace.
// Throws SessionExhausted when the serialized length exceeds max_frames.
TdmRun tdm_session(std::shared_ptr<const Params> params, const ScriptedFeed& feed, int chunk_frames,
                   const RunOptions& opt = {});

} // namespace fdx::runtime
