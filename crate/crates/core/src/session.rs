//! One live authoring session: the simulated world, the sequence and its
//! execution state, advanced together one tick at a time.

use crate::action::ActionSequence;
use crate::executor::{Edit, ExecError, Executor, StatusEvent};
use crate::geometry::Pose6D;
use crate::kinematics::{solve_ik, IkSolution, RobotModel, Side};
use crate::sim::{DispatchError, Scene, SceneError, World};
use crate::stance::{plan_to_stance, FootstepPlan, Stance, GROUND_HEIGHT};

#[derive(Debug, Clone)]
pub struct Session {
    world: World,
    executor: Executor,
    registered: Vec<String>,
}

impl Session {
    /// Builds the world and registers task frames from its first detections.
    pub fn new(model: RobotModel, scene: Scene, sequence: ActionSequence, seed: u64) -> Result<Self, SceneError> {
        let mut world = World::new(model, scene, seed)?;
        let registered = world.register_task_frames();
        Ok(Self {
            world,
            executor: Executor::new(sequence),
            registered,
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn sequence(&self) -> &ActionSequence {
        self.executor.sequence()
    }

    /// Task frames added by registration.
    pub fn registered_frames(&self) -> &[String] {
        &self.registered
    }

    /// Advances the world one tick, then the executor.
    pub fn step(&mut self) {
        self.world.step();
        self.executor.tick(&mut self.world);
    }

    pub fn execute_manual(&mut self) -> Result<(), ExecError> {
        self.executor.execute_selected(&mut self.world)
    }

    pub fn set_automatic(&mut self, on: bool) {
        self.executor.set_automatic(on);
    }

    pub fn abort(&mut self) {
        self.executor.abort(&mut self.world);
    }

    pub fn apply_edit(&mut self, edit: Edit) -> Result<(), ExecError> {
        self.executor.apply_edit(edit)
    }

    pub fn replace_sequence(&mut self, sequence: ActionSequence) -> Result<(), ExecError> {
        self.executor.replace_sequence(sequence)
    }

    /// Replaces the world with a fresh one built from `scene`. Refused while
    /// an action runs. The sequence is kept and rewound.
    pub fn load_scene(&mut self, scene: Scene) -> Result<(), SessionError> {
        if let Some(index) = self.executor.executing() {
            return Err(ExecError::EditConflict { index }.into());
        }
        let mut world = World::new(self.world.model().clone(), scene, self.world.seed())?;
        self.registered = world.register_task_frames();
        self.world = world;
        let sequence = self.executor.sequence().clone();
        self.executor = Executor::new(sequence);
        Ok(())
    }

    pub fn take_events(&mut self) -> Vec<StatusEvent> {
        self.executor.take_events()
    }

    /// IK for a hand goal given in `frame`, without moving the robot.
    pub fn ik_preview(&self, side: Side, goal: &Pose6D, frame: &str) -> Result<IkSolution, DispatchError> {
        let parent = self.world.frames().resolve_world(frame)?;
        let target = self.world.chest_pose().inverse().compose(&parent.compose(goal));
        Ok(solve_ik(self.world.model(), side.arm_chain(), &target, self.world.joints()).expect("bundled chains"))
    }

    /// Footstep plan from the current stance to a stance goal in `frame`.
    pub fn stance_preview(
        &self,
        left: &Pose6D,
        right: &Pose6D,
        frame: &str,
        swing_duration: f64,
        transfer_duration: f64,
    ) -> Result<FootstepPlan, DispatchError> {
        let parent = self.world.frames().resolve_world(frame)?;
        let flat = |p: &Pose6D| parent.compose(p).flattened(GROUND_HEIGHT);
        let goal = Stance::new(flat(left), flat(right));
        plan_to_stance(
            self.world.stance(),
            &goal,
            &self.world.scene().planner,
            swing_duration,
            transfer_duration,
        )
        .map_err(|e| DispatchError::UnreachableGoal(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Exec(e) => e.code(),
            SessionError::Scene(_) => "InvalidScene",
        }
    }
}
