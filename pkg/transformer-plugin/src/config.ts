/** Plugin configuration. Keys arrive snake_case on the wire. */

export interface PluginConfig {
    baseModelId: string;
    lmEpochs: number;
    maskProb: number;
    lmLearningRate: number;
    clsEpochs: number;
    clsLearningRate: number;
    weightDecay: number;
    warmupSteps: number;
    maxTokens: number;
    lmBatchSize: number;
    clsBatchSize: number;
    scoreBatchSize: number;
    vocabSize: number;
    dModel: number;
    numLayers: number;
    numHeads: number;
    ffnDim: number;
    trainSeed: number;
    cacheDir: string;
    device: string;
}

// Miniature desk-scale defaults. The architecture family matches the large
// pretrained encoders (token+position embeddings, pre-LN self-attention
// blocks, masked-LM head, first-position classification head) but at a size
// a CPU handles in seconds; this is explicitly not a replication of any
// published checkpoint.
export const DEFAULTS: PluginConfig = {
    baseModelId: "mini-encoder-cased-v1",
    lmEpochs: 1,
    maskProb: 0.15,
    lmLearningRate: 5e-5,
    clsEpochs: 20,
    clsLearningRate: 0.001,
    weightDecay: 0.01,
    warmupSteps: 50,
    maxTokens: 512,
    lmBatchSize: 16,
    clsBatchSize: 8,
    scoreBatchSize: 64,
    vocabSize: 2000,
    dModel: 48,
    numLayers: 2,
    numHeads: 4,
    ffnDim: 96,
    trainSeed: 1234,
    cacheDir: ".tarsim-plugin-cache",
    device: "cpu",
};

const WIRE_KEYS: Record<string, keyof PluginConfig> = {
    base_model_id: "baseModelId",
    lm_epochs: "lmEpochs",
    mask_prob: "maskProb",
    lm_learning_rate: "lmLearningRate",
    cls_epochs: "clsEpochs",
    cls_learning_rate: "clsLearningRate",
    weight_decay: "weightDecay",
    warmup_steps: "warmupSteps",
    max_tokens: "maxTokens",
    lm_batch_size: "lmBatchSize",
    cls_batch_size: "clsBatchSize",
    score_batch_size: "scoreBatchSize",
    vocab_size: "vocabSize",
    d_model: "dModel",
    num_layers: "numLayers",
    num_heads: "numHeads",
    ffn_dim: "ffnDim",
    train_seed: "trainSeed",
    cache_dir: "cacheDir",
    device: "device",
};

export function parseConfig(wire: Record<string, unknown>): PluginConfig {
    const config: PluginConfig = { ...DEFAULTS };
    for (const [key, value] of Object.entries(wire)) {
        const field = WIRE_KEYS[key];
        if (field === undefined) {
            throw new Error(`unknown config key '${key}'`);
        }
        (config as Record<keyof PluginConfig, unknown>)[field] = value;
    }
    validateConfig(config);
    return config;
}

export function validateConfig(config: PluginConfig): void {
    if (!(config.maskProb > 0 && config.maskProb < 1)) {
        throw new Error(`mask_prob must be in (0, 1), got ${config.maskProb}`);
    }
    if (config.lmEpochs < 0) {
        throw new Error(`lm_epochs must be >= 0, got ${config.lmEpochs}`);
    }
    if (config.dModel % config.numHeads !== 0) {
        throw new Error(`d_model ${config.dModel} not divisible by num_heads ${config.numHeads}`);
    }
    if (config.maxTokens < 2) {
        throw new Error(`max_tokens must leave room for text, got ${config.maxTokens}`);
    }
    // CPU is the only execution provider in this build; anything else must
    // fail loudly rather than silently falling back for LM fine-tuning.
    if (config.device !== "cpu") {
        throw new Error(`device '${config.device}' unavailable (only 'cpu' in this build)`);
    }
}
