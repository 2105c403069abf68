//! Execution state machine over an action sequence.
//!
//! The cursor `selected` is also the next action to run. Actions before it
//! have finished (succeeded or failed), actions after it are pending, and at
//! most one action, the selected one, is executing.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::{Action, ActionSequence, FrameIssue, Violation};
use crate::geometry::FrameTree;
use crate::sim::{DispatchError, TaskProgress, World};

/// Completion deadline as a multiple of an action's nominal duration.
pub const TIMEOUT_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Manual,
    Automatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionStatus {
    Pending,
    Executing,
    Succeeded,
    Failed,
}

impl ActionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionStatus::Pending => "pending",
            ActionStatus::Executing => "executing",
            ActionStatus::Succeeded => "succeeded",
            ActionStatus::Failed => "failed",
        }
    }

    pub fn is_finished(self) -> bool {
        matches!(self, ActionStatus::Succeeded | ActionStatus::Failed)
    }
}

impl fmt::Display for ActionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One status transition of one action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusEvent {
    pub index: usize,
    pub description: String,
    pub status: ActionStatus,
    pub sim_time: f64,
    /// Why the action failed, for failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("an action is already executing")]
    AlreadyExecuting,
    #[error("no action left to execute")]
    SequenceExhausted,
    #[error("sequence is not executable: {}", describe_issues(.issues, .violations))]
    ValidationFailed {
        issues: Vec<FrameIssue>,
        violations: Vec<Violation>,
    },
    #[error("edit touches executing action {index}")]
    EditConflict { index: usize },
    #[error("index {index} out of range for {len} actions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
}

fn describe_issues(issues: &[FrameIssue], violations: &[Violation]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .chain(violations.iter().map(|v| match v.index {
            Some(i) => format!("action {i}: {}: {}", v.field, v.message),
            None => format!("{}: {}", v.field, v.message),
        }))
        .collect::<Vec<_>>()
        .join("; ")
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::AlreadyExecuting => "AlreadyExecuting",
            ExecError::SequenceExhausted => "SequenceExhausted",
            ExecError::ValidationFailed { .. } => "ValidationFailed",
            ExecError::EditConflict { .. } => "EditConflict",
            ExecError::IndexOutOfRange { .. } => "IndexOutOfRange",
            ExecError::Dispatch(e) => e.code(),
        }
    }
}

/// What the executor drives. The simulator is one; tests use scripted plants.
pub trait Plant {
    /// Starts an action. Errors mean nothing moved.
    fn dispatch(&mut self, action: &Action) -> Result<(), DispatchError>;
    fn progress(&self) -> Option<TaskProgress>;
    /// Ends the running task (completed, failed or aborted).
    fn finish(&mut self);
    fn frames(&self) -> &FrameTree;
    fn sim_time(&self) -> f64;
}

impl Plant for World {
    fn dispatch(&mut self, action: &Action) -> Result<(), DispatchError> {
        World::dispatch(self, action).map(|_| ())
    }

    fn progress(&self) -> Option<TaskProgress> {
        World::progress(self)
    }

    fn finish(&mut self) {
        self.finish_task();
    }

    fn frames(&self) -> &FrameTree {
        World::frames(self)
    }

    fn sim_time(&self) -> f64 {
        World::sim_time(self)
    }
}

/// A change to the sequence requested while the session is live.
#[derive(Debug, Clone, PartialEq)]
pub enum Edit {
    Insert { index: usize, action: Action },
    Remove { index: usize },
    Update { index: usize, action: Action },
}

#[derive(Debug, Clone)]
pub struct Executor {
    sequence: ActionSequence,
    statuses: Vec<ActionStatus>,
    selected: usize,
    mode: Mode,
    executing: bool,
    events: Vec<StatusEvent>,
}

impl Executor {
    pub fn new(sequence: ActionSequence) -> Self {
        Self {
            statuses: vec![ActionStatus::Pending; sequence.len()],
            sequence,
            selected: 0,
            mode: Mode::Manual,
            executing: false,
            events: Vec::new(),
        }
    }

    pub fn sequence(&self) -> &ActionSequence {
        &self.sequence
    }

    pub fn statuses(&self) -> &[ActionStatus] {
        &self.statuses
    }

    pub fn selected(&self) -> usize {
        self.selected
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Index of the executing action, if any.
    pub fn executing(&self) -> Option<usize> {
        self.executing.then_some(self.selected)
    }

    /// True once every action has run.
    pub fn is_exhausted(&self) -> bool {
        self.selected >= self.sequence.len()
    }

    /// Transitions recorded since the last call.
    pub fn take_events(&mut self) -> Vec<StatusEvent> {
        std::mem::take(&mut self.events)
    }

    fn transition(&mut self, index: usize, status: ActionStatus, time: f64, reason: Option<String>) {
        self.statuses[index] = status;
        self.events.push(StatusEvent {
            index,
            description: self.sequence.actions[index].description.clone(),
            status,
            sim_time: time,
            reason,
        });
    }

    fn check_executable(&self, frames: &FrameTree) -> Result<(), ExecError> {
        let issues = self.sequence.validate_against_frames(frames);
        let violations = self.sequence.violations();
        if issues.is_empty() && violations.is_empty() {
            Ok(())
        } else {
            Err(ExecError::ValidationFailed { issues, violations })
        }
    }

    /// Dispatches the selected action.
    pub fn execute_selected(&mut self, plant: &mut impl Plant) -> Result<(), ExecError> {
        if self.executing {
            return Err(ExecError::AlreadyExecuting);
        }
        if self.is_exhausted() {
            return Err(ExecError::SequenceExhausted);
        }
        self.check_executable(plant.frames())?;
        let index = self.selected;
        let time = plant.sim_time();
        match plant.dispatch(&self.sequence.actions[index]) {
            Ok(()) => {
                self.executing = true;
                self.transition(index, ActionStatus::Executing, time, None);
                Ok(())
            }
            Err(e) => {
                self.transition(index, ActionStatus::Failed, time, Some(e.to_string()));
                self.mode = Mode::Manual;
                Err(e.into())
            }
        }
    }

    /// Switches automatic continuation on or off. Never interrupts the
    /// running action.
    pub fn set_automatic(&mut self, on: bool) {
        if on && self.is_exhausted() {
            return;
        }
        self.mode = if on { Mode::Automatic } else { Mode::Manual };
    }

    /// Polls the running action and, in automatic mode, starts the next one.
    /// Call once per simulator tick, after the plant has advanced.
    pub fn tick(&mut self, plant: &mut impl Plant) {
        if self.executing {
            if let Some(p) = plant.progress() {
                let time = plant.sim_time();
                if p.motion_finished && p.tolerance_met && p.elapsed >= p.nominal_duration - 1e-9 {
                    plant.finish();
                    self.executing = false;
                    self.transition(self.selected, ActionStatus::Succeeded, time, None);
                    self.selected += 1;
                } else if p.elapsed >= p.nominal_duration * TIMEOUT_FACTOR - 1e-9 {
                    plant.finish();
                    self.executing = false;
                    let reason = if p.motion_finished {
                        "goal tolerance not met before timeout"
                    } else {
                        "motion did not finish before timeout"
                    };
                    self.transition(self.selected, ActionStatus::Failed, time, Some(reason.into()));
                    self.mode = Mode::Manual;
                }
            }
        }
        if self.mode == Mode::Automatic && !self.executing && !self.is_exhausted() {
            let index = self.selected;
            let time = plant.sim_time();
            if let Err(e) = self.check_executable(plant.frames()) {
                self.transition(index, ActionStatus::Failed, time, Some(e.to_string()));
                self.mode = Mode::Manual;
                return;
            }
            // Failures are recorded as a status transition.
            let _ = self.execute_selected(plant);
        }
    }

    /// Stops the running action, marking it failed, and leaves automatic mode.
    pub fn abort(&mut self, plant: &mut impl Plant) {
        self.mode = Mode::Manual;
        if self.executing {
            plant.finish();
            self.executing = false;
            let time = plant.sim_time();
            self.transition(self.selected, ActionStatus::Failed, time, Some("aborted".into()));
        }
    }

    /// Applies an edit. Only the executing action and the slots before it
    /// are protected while something runs.
    pub fn apply_edit(&mut self, edit: Edit) -> Result<(), ExecError> {
        let len = self.sequence.len();
        let running = self.executing().map(|i| i as isize).unwrap_or(-1);
        let check = |action: &Action, index: usize| {
            let violations = action.violations(Some(index));
            if violations.is_empty() {
                Ok(())
            } else {
                Err(ExecError::ValidationFailed {
                    issues: vec![],
                    violations,
                })
            }
        };
        match edit {
            Edit::Insert { index, action } => {
                if index > len {
                    return Err(ExecError::IndexOutOfRange { index, len });
                }
                if (index as isize) <= running {
                    return Err(ExecError::EditConflict { index });
                }
                check(&action, index)?;
                self.sequence.actions.insert(index, action);
                self.statuses.insert(index, ActionStatus::Pending);
                if index <= self.selected {
                    // Only reachable when idle. The cursor rewinds so the new
                    // action runs next.
                    self.selected = index;
                    for s in &mut self.statuses[index..] {
                        *s = ActionStatus::Pending;
                    }
                }
            }
            Edit::Remove { index } => {
                if index >= len {
                    return Err(ExecError::IndexOutOfRange { index, len });
                }
                if index as isize == running {
                    return Err(ExecError::EditConflict { index });
                }
                self.sequence.actions.remove(index);
                self.statuses.remove(index);
                if index < self.selected {
                    self.selected -= 1;
                } else if index == self.selected {
                    // The cursor now points at the following action.
                    if let Some(s) = self.statuses.get_mut(index) {
                        *s = ActionStatus::Pending;
                    }
                }
            }
            Edit::Update { index, action } => {
                if index >= len {
                    return Err(ExecError::IndexOutOfRange { index, len });
                }
                if index as isize == running {
                    return Err(ExecError::EditConflict { index });
                }
                check(&action, index)?;
                self.sequence.actions[index] = action;
                if index == self.selected {
                    self.statuses[index] = ActionStatus::Pending;
                }
            }
        }
        Ok(())
    }

    /// Swaps in a new sequence and rewinds to its start.
    pub fn replace_sequence(&mut self, sequence: ActionSequence) -> Result<(), ExecError> {
        if let Some(index) = self.executing() {
            return Err(ExecError::EditConflict { index });
        }
        let violations = sequence.violations();
        if !violations.is_empty() {
            return Err(ExecError::ValidationFailed {
                issues: vec![],
                violations,
            });
        }
        self.statuses = vec![ActionStatus::Pending; sequence.len()];
        self.sequence = sequence;
        self.selected = 0;
        self.mode = Mode::Manual;
        Ok(())
    }

    /// Checks the frontier invariants; used by tests and debug assertions.
    pub fn invariant_violation(&self) -> Option<String> {
        if self.statuses.len() != self.sequence.len() {
            return Some("status list length differs from sequence length".into());
        }
        let executing: Vec<usize> = (0..self.statuses.len())
            .filter(|&i| self.statuses[i] == ActionStatus::Executing)
            .collect();
        match (self.executing, executing.as_slice()) {
            (false, []) => {}
            (true, [i]) if *i == self.selected => {}
            _ => return Some(format!("executing set {executing:?} with selected {}", self.selected)),
        }
        if self.selected > self.statuses.len() {
            return Some("selected past end".into());
        }
        if let Some(i) = (0..self.selected).find(|&i| !self.statuses[i].is_finished()) {
            return Some(format!("action {i} before the cursor is {}", self.statuses[i]));
        }
        if let Some(i) = (self.selected + 1..self.statuses.len()).find(|&i| self.statuses[i] != ActionStatus::Pending) {
            return Some(format!("action {i} after the cursor is {}", self.statuses[i]));
        }
        None
    }
}
