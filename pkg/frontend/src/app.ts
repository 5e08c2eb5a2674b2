/** Single-page annotation flow: login, judge one item at a time, done. */

import { fetchNextItem, submitJudgment, UiItem } from './api.js'

const GUIDANCE =
    'Mark the candidate premise as plausible if it is grammatical, relevant ' +
    'to the argument, coherent with commonsense, and completes the argument.'

const STORAGE_KEY = 'premisegen-annotator-id'

type RetryAction = () => Promise<void>

export class AnnotationApp {
    private annotatorId: string | null
    private current: UiItem | null = null
    private judged = 0
    private submitting = false
    private retryAction: RetryAction | null = null

    constructor(private root: HTMLElement) {
        this.annotatorId = window.sessionStorage.getItem(STORAGE_KEY)
        window.addEventListener('keydown', (event) => this.onKey(event))
    }

    async start(): Promise<void> {
        if (this.annotatorId) {
            await this.loadNext()
        } else {
            this.renderLogin()
        }
    }

    // ------------------------------------------------------------------ views

    private renderLogin(): void {
        this.root.innerHTML = `
            <section class="card login">
              <h1>Premise plausibility judging</h1>
              <label for="annotator-input">Your annotator ID</label>
              <input id="annotator-input" type="text" autocomplete="off" />
              <button id="start-button" type="button">Start judging</button>
            </section>`
        const input = this.query<HTMLInputElement>('#annotator-input')
        const begin = async () => {
            const value = input.value.trim()
            if (!value) {
                input.focus()
                return
            }
            this.annotatorId = value
            window.sessionStorage.setItem(STORAGE_KEY, value)
            await this.loadNext()
        }
        this.query<HTMLButtonElement>('#start-button').addEventListener('click', begin)
        input.addEventListener('keydown', (event) => {
            if (event.key === 'Enter') void begin()
        })
    }

    private renderItem(item: UiItem): void {
        this.current = item
        this.submitting = false
        this.root.innerHTML = `
            <section class="card judging">
              <p class="progress">Judged ${item.progress.done}; ${item.progress.remaining} to go</p>
              <div class="block premise">
                <h2>Stated premise</h2>
                <p>${escapeHtml(item.stated_premise)}</p>
              </div>
              <div class="block candidate">
                <h2>Candidate implicit premise</h2>
                <p>${escapeHtml(item.candidate_premise)}</p>
              </div>
              <div class="block claim">
                <h2>Stated claim</h2>
                <p>${escapeHtml(item.stated_claim)}</p>
              </div>
              <p class="guidance">${GUIDANCE}</p>
              <div class="actions">
                <button id="plausible-button" type="button">Plausible (P)</button>
                <button id="not-plausible-button" type="button">Not plausible (N)</button>
              </div>
              <div id="notice" class="notice" hidden></div>
            </section>`
        this.query<HTMLButtonElement>('#plausible-button').addEventListener('click', () =>
            void this.judge(true),
        )
        this.query<HTMLButtonElement>('#not-plausible-button').addEventListener('click', () =>
            void this.judge(false),
        )
    }

    private renderDone(): void {
        this.current = null
        this.root.innerHTML = `
            <section class="card done">
              <h1>All done</h1>
              <p id="done-count">You judged ${this.judged} item${this.judged === 1 ? '' : 's'}. Thank you!</p>
            </section>`
    }

    private renderRetryBanner(message: string, action: RetryAction): void {
        this.retryAction = action
        const banner = document.createElement('div')
        banner.className = 'retry-banner'
        banner.innerHTML = `
            <span>${escapeHtml(message)}</span>
            <button id="retry-button" type="button">Retry</button>`
        this.root.prepend(banner)
        banner.querySelector('#retry-button')!.addEventListener('click', async () => {
            banner.remove()
            const retry = this.retryAction
            this.retryAction = null
            if (retry) await retry()
        })
    }

    // ---------------------------------------------------------------- actions

    private async loadNext(): Promise<void> {
        if (!this.annotatorId) return
        try {
            const result = await fetchNextItem(this.annotatorId)
            if (result.kind === 'done') {
                this.renderDone()
            } else {
                this.renderItem(result.item)
            }
        } catch (error) {
            this.renderRetryBanner(
                `Could not reach the annotation server: ${String(error)}`,
                () => this.loadNext(),
            )
        }
    }

    private async judge(plausible: boolean): Promise<void> {
        if (!this.current || !this.annotatorId || this.submitting) return
        this.submitting = true
        this.setButtonsDisabled(true)
        const item = this.current
        try {
            const result = await submitJudgment(item.item_id, this.annotatorId, plausible)
            if (result === 'conflict') {
                this.showNotice('This item was already judged; moving on.')
            } else {
                this.judged += 1
            }
            await this.loadNext()
        } catch (error) {
            // keep the rendered item; the retry re-sends this exact judgment
            this.setButtonsDisabled(false)
            this.submitting = false
            this.renderRetryBanner(
                `Could not submit the judgment: ${String(error)}`,
                () => this.judge(plausible),
            )
        }
    }

    private onKey(event: KeyboardEvent): void {
        if (!this.current || this.submitting) return
        const target = event.target as HTMLElement | null
        if (target && target.tagName === 'INPUT') return
        if (event.key === 'p' || event.key === 'P') void this.judge(true)
        if (event.key === 'n' || event.key === 'N') void this.judge(false)
    }

    // ---------------------------------------------------------------- helpers

    private setButtonsDisabled(disabled: boolean): void {
        for (const id of ['#plausible-button', '#not-plausible-button']) {
            const button = this.root.querySelector<HTMLButtonElement>(id)
            if (button) button.disabled = disabled
        }
    }

    private showNotice(message: string): void {
        const notice = this.root.querySelector<HTMLElement>('#notice')
        if (notice) {
            notice.textContent = message
            notice.hidden = false
        }
    }

    private query<T extends Element>(selector: string): T {
        const element = this.root.querySelector<T>(selector)
        if (!element) throw new Error(`missing element ${selector}`)
        return element
    }
}

function escapeHtml(text: string): string {
    return text
        .replaceAll('&', '&amp;')
        .replaceAll('<', '&lt;')
        .replaceAll('>', '&gt;')
        .replaceAll('"', '&quot;')
}

export function createApp(root: HTMLElement): AnnotationApp {
    return new AnnotationApp(root)
}
