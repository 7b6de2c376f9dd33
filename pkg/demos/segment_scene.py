# This demo illustrates a full pass from a synthetic scene to a mask and
# its scores.

import favs

# Generate a synthetic scene
scene = favs.gen_scene(42)

# Set up the model
parameters = favs.parameters.default()
parameters["experts"] = 8
config = favs.ModelConfig.from_parameters(parameters)
params = favs.pipeline.init_params(config)

# Predict masks
result = favs.pipeline.predict(scene.stage_features, scene.audio_features, config, params)

# Score them against the ground truth
mask = result.prediction.binary_mask
print(f"M_J = {favs.metric_jaccard(mask, scene.gt_masks):.4f}")
print(f"M_F = {favs.metric_fscore(mask, scene.gt_masks):.4f}")
