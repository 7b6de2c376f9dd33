# This demo illustrates how the routing entropy decides how many experts
# each frame uses.

import favs

# Generate a synthetic scene and seeded parameters
scene = favs.gen_scene(7, frames=4)
config = favs.ModelConfig.from_parameters(favs.parameters.default())
params = favs.pipeline.init_params(config)

# Run the fusion stages
states = favs.run_stages(scene.stage_features, scene.audio_features, config, params)

# Print entropy and active experts per frame
for state in states:
    for t, (entropy, k) in enumerate(zip(state.visual_routing.entropy, state.visual_routing.k_eff)):
        print(f"stage {state.stage_index} frame {t}: entropy {entropy:.3f}, {k} experts")
