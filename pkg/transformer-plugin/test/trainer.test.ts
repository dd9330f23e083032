import * as fs from "fs";
import { describe, expect, it } from "vitest";

import { MiniEncoder } from "../src/model";
import { buildTokenizer } from "../src/tokenizer";
import {
    checkpointPath,
    clsFinetune,
    initializeForCorpus,
    lmEvalLoss,
    lmFinetune,
    scoreAll,
    trainingAccuracy,
} from "../src/trainer";
import { fixtureCorpus, makeDocs, testConfig } from "./helpers";

describe("LM fine-tuning", () => {
    it("zero epochs leaves parameters identical to the base checkpoint", () => {
        const config = testConfig({ lmEpochs: 0 });
        const corpus = fixtureCorpus(30);
        const state = initializeForCorpus(config, corpus);
        const tokenizer = buildTokenizer(corpus.docs.map((d) => d.text), config.vocabSize);
        const base = new MiniEncoder(
            {
                vocabSize: tokenizer.vocabSize,
                dModel: config.dModel,
                numLayers: config.numLayers,
                numHeads: config.numHeads,
                ffnDim: config.ffnDim,
                maxTokens: config.maxTokens,
            },
            config.baseModelId
        );
        expect(state.model.parameterHash()).toBe(base.parameterHash());
        base.dispose();
        state.model.dispose();
    });

    it("one epoch on a 200-doc toy corpus lowers masked-LM loss", () => {
        const config = testConfig({ lmEpochs: 0 });
        const state = initializeForCorpus(config, fixtureCorpus(200));
        const before = lmEvalLoss(state);
        lmFinetune(state, 1);
        const after = lmEvalLoss(state);
        expect(after).toBeLessThan(before);
        state.model.dispose();
    });

    it("changes parameters when epochs > 0 and caches the checkpoint", () => {
        const config = testConfig({ lmEpochs: 1 });
        const corpus = fixtureCorpus(30);
        const state = initializeForCorpus(config, corpus);
        const file = checkpointPath(config, corpus.hash, 1);
        expect(fs.existsSync(file)).toBe(true);
        // a second state loads the cached weights instead of retraining
        const reloaded = initializeForCorpus(config, corpus);
        expect(reloaded.model.parameterHash()).toBe(state.model.parameterHash());
        state.model.dispose();
        reloaded.model.dispose();
    });
});

describe("classification fine-tuning", () => {
    it("warm-starts: parameter hash is carried across the call boundary", () => {
        const state = initializeForCorpus(testConfig(), fixtureCorpus(30));
        const labeled = [0, 1, 2, 3, 4, 5].map((i) => ({
            seqIndex: i,
            label: i % 4 === 0 ? 1 : 0,
        }));
        clsFinetune(state, labeled, 2);
        const afterFirst = state.model.parameterHash();
        // entering the next call must not reset anything: zero epochs => no-op
        clsFinetune(state, labeled, 0);
        expect(state.model.parameterHash()).toBe(afterFirst);
        // and a real second call moves on from exactly that state
        clsFinetune(state, labeled, 1);
        expect(state.model.parameterHash()).not.toBe(afterFirst);
        state.model.dispose();
    });

    it("overfits a 20-doc fixture to training accuracy 1.0 in 20 epochs", () => {
        const state = initializeForCorpus(testConfig(), fixtureCorpus(20, 2));
        const labeled = [...Array(20).keys()].map((i) => ({
            seqIndex: i,
            label: i % 2 === 0 ? 1 : 0,
        }));
        clsFinetune(state, labeled, 20);
        expect(trainingAccuracy(state, labeled)).toBe(1.0);
        state.model.dispose();
    });

    it("fit history is deterministic given the same call sequence", () => {
        const run = () => {
            const state = initializeForCorpus(testConfig(), fixtureCorpus(24));
            const labeled = [0, 1, 2, 3].map((i) => ({ seqIndex: i, label: i === 0 ? 1 : 0 }));
            clsFinetune(state, labeled, 3);
            const scores = scoreAll(state);
            state.model.dispose();
            return scores;
        };
        expect(run()).toEqual(run());
    });
});
