import * as fs from "fs";
import * as os from "os";
import * as path from "path";

import { DEFAULTS, PluginConfig } from "../src/config";
import { loadCorpus, TaskCorpus } from "../src/corpus";

/** Small config so tests run in seconds on the pure-JS backend. */
export function testConfig(overrides: Partial<PluginConfig> = {}): PluginConfig {
    return {
        ...DEFAULTS,
        dModel: 32,
        numLayers: 2,
        numHeads: 4,
        ffnDim: 64,
        maxTokens: 24,
        vocabSize: 400,
        lmEpochs: 0,
        cacheDir: fs.mkdtempSync(path.join(os.tmpdir(), "plugin-cache-")),
        ...overrides,
    };
}

export interface FixtureDoc {
    docId: string;
    relevant: boolean;
    text: string;
}

export function makeDocs(n: number, positiveEvery = 4): FixtureDoc[] {
    const docs: FixtureDoc[] = [];
    for (let i = 0; i < n; i++) {
        const relevant = i % positiveEvery === 0;
        const signal = relevant ? "signal signal beacon" : "noise static hum";
        docs.push({
            docId: `d${String(i).padStart(3, "0")}`,
            relevant,
            text: `${signal} common${i % 5} shared${i % 3} filler tail${i % 7}`,
        });
    }
    return docs;
}

export function writeCorpusFile(docs: FixtureDoc[], category = "c"): string {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "plugin-corpus-"));
    const file = path.join(dir, "corpus.jsonl");
    const lines = docs.map((d) =>
        JSON.stringify({ doc_id: d.docId, text: d.text, categories: d.relevant ? [category] : [] })
    );
    fs.writeFileSync(file, lines.join("\n") + "\n");
    return file;
}

export function fixtureCorpus(n: number, positiveEvery = 4): TaskCorpus {
    return loadCorpus(writeCorpusFile(makeDocs(n, positiveEvery)), "c");
}
