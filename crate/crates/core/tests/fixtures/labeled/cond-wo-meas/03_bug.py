from qiskit import ClassicalRegister, QuantumCircuit, QuantumRegister, transpile

q = QuantumRegister(3, "q")
c = ClassicalRegister(3, "c")
qc = QuantumCircuit(q, c)
for i in range(1, 3):
    qc.x(q[i]).c_if(c, i)  # expect: cond-wo-meas
qc.h(q[0])
qc.measure(q, c)
