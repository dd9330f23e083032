import { spawn, ChildProcess } from "child_process";
import * as path from "path";
import * as readline from "readline";
import { afterEach, describe, expect, it } from "vitest";

import { makeDocs, writeCorpusFile } from "./helpers";

const SERVER = path.join(__dirname, "..", "dist", "main.js");

class Client {
    proc: ChildProcess;
    private lines: AsyncIterableIterator<string>;

    constructor() {
        this.proc = spawn("node", [SERVER], { stdio: ["pipe", "pipe", "inherit"] });
        const rl = readline.createInterface({ input: this.proc.stdout! });
        this.lines = rl[Symbol.asyncIterator]();
    }

    async call(message: object): Promise<Record<string, unknown>> {
        this.proc.stdin!.write(JSON.stringify(message) + "\n");
        const next = await this.lines.next();
        if (next.done) throw new Error("server closed stdout");
        return JSON.parse(next.value);
    }

    async raw(line: string): Promise<Record<string, unknown>> {
        this.proc.stdin!.write(line + "\n");
        const next = await this.lines.next();
        if (next.done) throw new Error("server closed stdout");
        return JSON.parse(next.value);
    }

    kill(): void {
        this.proc.kill();
    }
}

const FAST_CONFIG = {
    lm_epochs: 0,
    cls_epochs: 3,
    d_model: 32,
    num_layers: 1,
    num_heads: 4,
    ffn_dim: 64,
    max_tokens: 24,
    vocab_size: 300,
};

describe("protocol server", () => {
    let client: Client;

    afterEach(() => client?.kill());

    it("serves the full init/load/fit/score/shutdown transcript", async () => {
        const corpusFile = writeCorpusFile(makeDocs(10));
        client = new Client();
        const init = await client.call({ cmd: "init", protocol: 1, config: FAST_CONFIG });
        expect(init).toMatchObject({ ok: true, name: "mini-transformer" });

        const load = await client.call({ cmd: "load_corpus", path: corpusFile, category: "c" });
        expect(load).toMatchObject({ ok: true, n_docs: 10 });

        const fit = await client.call({
            cmd: "fit",
            labeled: [
                { doc_id: "d000", label: 1 },
                { doc_id: "d001", label: 0 },
            ],
        });
        expect(fit.ok).toBe(true);
        expect(typeof fit.train_seconds).toBe("number");

        const score = await client.call({ cmd: "score" });
        expect(score.ok).toBe(true);
        const scores = score.scores as number[];
        expect(scores).toHaveLength(10);
        for (const p of scores) {
            expect(p).toBeGreaterThan(0);
            expect(p).toBeLessThan(1);
        }

        const shutdown = await client.call({ cmd: "shutdown" });
        expect(shutdown).toMatchObject({ ok: true });
        const code = await new Promise((resolve) => client.proc.on("exit", resolve));
        expect(code).toBe(0);
    });

    it("rejects fit before load_corpus but stays alive", async () => {
        client = new Client();
        await client.call({ cmd: "init", protocol: 1, config: FAST_CONFIG });
        const fit = await client.call({ cmd: "fit", labeled: [] });
        expect(fit.ok).toBe(false);
        expect(String(fit.error)).toMatch(/fit before load_corpus/);
        // process still answers
        const corpusFile = writeCorpusFile(makeDocs(6));
        const load = await client.call({ cmd: "load_corpus", path: corpusFile, category: "c" });
        expect(load.ok).toBe(true);
    });

    it("rejects labels outside {0,1}", async () => {
        const corpusFile = writeCorpusFile(makeDocs(6));
        client = new Client();
        await client.call({ cmd: "init", protocol: 1, config: FAST_CONFIG });
        await client.call({ cmd: "load_corpus", path: corpusFile, category: "c" });
        const fit = await client.call({ cmd: "fit", labeled: [{ doc_id: "d000", label: 2 }] });
        expect(fit.ok).toBe(false);
        expect(String(fit.error)).toMatch(/label outside/);
    });

    it("rejects score before any fit", async () => {
        const corpusFile = writeCorpusFile(makeDocs(6));
        client = new Client();
        await client.call({ cmd: "init", protocol: 1, config: FAST_CONFIG });
        await client.call({ cmd: "load_corpus", path: corpusFile, category: "c" });
        const score = await client.call({ cmd: "score" });
        expect(score.ok).toBe(false);
    });

    it("answers malformed requests with an error line and keeps serving", async () => {
        client = new Client();
        const bad = await client.raw("{not json");
        expect(bad.ok).toBe(false);
        const init = await client.call({ cmd: "init", protocol: 1, config: FAST_CONFIG });
        expect(init.ok).toBe(true);
    });

    it("rejects unsupported devices instead of silently falling back", async () => {
        client = new Client();
        const init = await client.call({
            cmd: "init",
            protocol: 1,
            config: { ...FAST_CONFIG, device: "cuda" },
        });
        expect(init.ok).toBe(false);
        expect(String(init.error)).toMatch(/device/);
    });

    it("rejects unknown protocol versions", async () => {
        client = new Client();
        const init = await client.call({ cmd: "init", protocol: 99, config: {} });
        expect(init.ok).toBe(false);
    });
});
